#include "parp/tasks/regression.hpp"

#include "parp/error.hpp"

namespace parp::tasks {

using namespace autonet;

LinearRegressionObjective::LinearRegressionObjective(Tensor inputs, std::vector<double> targets)
    : inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (inputs_.rank() != 2 || inputs_.rows() != targets_.size())
    throw ConfigError("regression inputs must be [n x d] with n targets");
}

double LinearRegressionObjective::loss(const std::vector<double>& w) const {
  if (w.size() != inputs_.cols()) throw ConfigError("weight length does not match inputs");
  double sum = 0.0;
  for (std::size_t r = 0; r < inputs_.rows(); ++r) {
    double pred = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) pred += inputs_.at(r, c) * w[c];
    const double e = pred - targets_[r];
    sum += e * e;
  }
  return sum / static_cast<double>(inputs_.rows());
}

ParamStore LinearRegressionObjective::make_store(const std::vector<double>& w) {
  ParamStore store;
  store.add("w", Tensor({w.size()}, w), true);
  return store;
}

double LinearRegressionObjective::train_loss(ParamStore& store, std::uint64_t, std::int64_t,
                                             std::size_t) {
  Param& p = store.get("w");
  const std::vector<double> w(p.value.data().begin(), p.value.data().end());
  const double n = static_cast<double>(inputs_.rows());
  double sum = 0.0;
  for (std::size_t r = 0; r < inputs_.rows(); ++r) {
    double pred = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) pred += inputs_.at(r, c) * w[c];
    const double e = pred - targets_[r];
    sum += e * e;
    for (std::size_t c = 0; c < w.size(); ++c) p.grad[c] += 2.0 * e * inputs_.at(r, c) / n;
  }
  return sum / n;
}

EvalResult LinearRegressionObjective::evaluate(ParamStore& store, Split) {
  const Param& p = store.get("w");
  return {loss(std::vector<double>(p.value.data().begin(), p.value.data().end())), 0.0};
}

}  // namespace parp::tasks
