#include "parp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "parp/error.hpp"

namespace parp {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  if (std::find(shape_.begin(), shape_.end(), 0u) != shape_.end())
    throw ConfigError("tensor dimensions must be positive");
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (std::find(shape_.begin(), shape_.end(), 0u) != shape_.end())
    throw ConfigError("tensor dimensions must be positive");
  if (shape_product(shape_) != data_.size())
    throw ConfigError("tensor data length does not match shape");
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const { return shape_.size() >= 2 ? shape_.front() : 1; }

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace parp
