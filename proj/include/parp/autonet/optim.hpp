#pragma once

#include <cstdint>
#include <vector>

#include "parp/autonet/param_store.hpp"

namespace parp::autonet {

enum class OptimizerKind { adam, sgd };

struct AdamState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;

  explicit AdamState(const ParamStore& store);
  AdamState() = default;
};

/// One bias-corrected Adam update of every param. Throws NumericalError
/// naming the param if any gradient is non-finite.
void adam_step(ParamStore& store, AdamState& state, double lr);

void sgd_step(ParamStore& store, double lr);

/// Adam or plain SGD behind one interface so training loops stay generic.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, const ParamStore& store);

  void step(ParamStore& store, double lr);
  /// Zeroes moment entries of param `index` wherever `keep(i)` is false.
  template <typename Keep>
  void zero_moments(std::size_t index, Keep keep) {
    if (kind_ != OptimizerKind::adam) return;
    auto& m = adam_.first[index];
    auto& v = adam_.second[index];
    for (std::size_t i = 0; i < m.size(); ++i)
      if (!keep(i)) m[i] = v[i] = 0.0;
  }
  void reset_moments();

  OptimizerKind kind() const { return kind_; }
  const AdamState& adam() const { return adam_; }

 private:
  OptimizerKind kind_;
  AdamState adam_;
};

}  // namespace parp::autonet
