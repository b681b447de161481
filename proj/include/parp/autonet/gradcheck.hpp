#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "parp/autonet/param_store.hpp"

namespace parp::autonet {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Evaluates the loss and fills store grads (grads are zeroed beforehand).
using LossFn = std::function<double(ParamStore&)>;

/// Relative error |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-3;

/// Compares analytic gradients against central differences for every scalar
/// of every param. Never throws on disagreement; reports the worst entry.
GradCheckReport finite_diff_check(ParamStore& store, const LossFn& loss_fn, double eps = 1e-6);

}  // namespace parp::autonet
