#include "parp/autonet/optim.hpp"

#include <cmath>

#include "parp/error.hpp"

namespace parp::autonet {

AdamState::AdamState(const ParamStore& store) {
  for (const auto& p : store.params()) {
    first.emplace_back(p.value.shape());
    second.emplace_back(p.value.shape());
  }
}

void adam_step(ParamStore& store, AdamState& state, double lr) {
  auto params = store.params();
  if (state.first.size() != params.size()) throw ConfigError("adam state does not match store");
  for (const auto& p : params)
    if (!p.grad.all_finite()) throw NumericalError("non-finite gradient in " + p.name);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = state.first[k];
    auto& v = state.second[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void sgd_step(ParamStore& store, double lr) {
  for (auto& p : store.params()) {
    if (!p.grad.all_finite()) throw NumericalError("non-finite gradient in " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * p.grad[i];
  }
}

Optimizer::Optimizer(OptimizerKind kind, const ParamStore& store) : kind_(kind) {
  if (kind_ == OptimizerKind::adam) adam_ = AdamState(store);
}

void Optimizer::step(ParamStore& store, double lr) {
  if (kind_ == OptimizerKind::adam)
    adam_step(store, adam_, lr);
  else
    sgd_step(store, lr);
}

void Optimizer::reset_moments() {
  for (auto& m : adam_.first) m.fill(0.0);
  for (auto& v : adam_.second) v.fill(0.0);
  adam_.step = 0;
}

}  // namespace parp::autonet
