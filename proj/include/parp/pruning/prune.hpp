#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "parp/autonet/optim.hpp"
#include "parp/autonet/param_store.hpp"
#include "parp/pruning/mask.hpp"

namespace parp::pruning {

/// round(s * d), half away from zero.
std::size_t pruned_count(double s, std::size_t d);

/// Unstructured global magnitude pruning: clears the round(s*d) smallest
/// |weight| over all prunable params together. Ties go to the earlier
/// (param order, flat index). Entries already cleared in `within` are taken
/// first, which makes iterative pruning nested.
Mask global_magnitude_mask(const autonet::ParamStore& store, double s, const Mask* within = nullptr);

/// Uniformly random mask with exactly round(s*d) cleared bits.
Mask random_mask(const autonet::ParamStore& store, double s, std::uint64_t seed);

/// Sets masked weights to zero in place. Gradients are not blocked.
void apply_zero(autonet::ParamStore& store, const Mask& mask);

/// Post-step hook pinning masked weights, their grads and optimizer moments to zero.
using StepHook = std::function<void(autonet::ParamStore&, autonet::Optimizer&)>;
StepHook freeze_apply(const autonet::ParamStore& store, Mask mask);

/// Fraction of exact zeros among prunable weights.
double weight_sparsity(const autonet::ParamStore& store);

/// Ordered (event, sparsity) pairs, non-decreasing, ending at the target.
struct SparsitySchedule {
  std::vector<std::pair<std::int64_t, double>> points;

  /// Sparsity for re-prune event `event` (1-based); past the end stays at target.
  double at(std::int64_t event) const;
  double target() const { return points.back().second; }
  void validate() const;
};

enum class ScheduleShape { linear, geometric };

/// `events` points moving from `start` to `target`, reaching target exactly at the last.
/// Geometric interpolates the kept fraction multiplicatively.
SparsitySchedule progressive_schedule(double start, double target, std::int64_t events,
                                      ScheduleShape shape = ScheduleShape::linear);

}  // namespace parp::pruning
