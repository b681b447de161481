#pragma once

#include <cstdint>

namespace parp::autonet {

/// Tri-phase schedule: linear ramp over the first 10% of steps, flat for the
/// next 40%, then exponential decay reaching peak_lr * floor_ratio at step N.
struct LRSchedule {
  double peak_lr = 1e-3;
  std::int64_t total_steps = 1000;
  double floor_ratio = 0.01;

  void validate() const;
};

double lr_at(const LRSchedule& schedule, std::int64_t step);

}  // namespace parp::autonet
