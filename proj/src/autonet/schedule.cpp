#include "parp/autonet/schedule.hpp"

#include <cmath>

#include "parp/error.hpp"

namespace parp::autonet {

void LRSchedule::validate() const {
  if (!(peak_lr >= 0.0)) throw ConfigError("peak_lr must be non-negative");
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (!(floor_ratio > 0.0 && floor_ratio <= 1.0)) throw ConfigError("floor_ratio must be in (0,1]");
}

double lr_at(const LRSchedule& schedule, std::int64_t step) {
  if (step < 0 || step > schedule.total_steps)
    throw InputError("lr_at: step " + std::to_string(step) + " outside [0," +
                     std::to_string(schedule.total_steps) + "]");
  const double n = static_cast<double>(schedule.total_steps);
  const double s = static_cast<double>(step);
  const double ramp_end = 0.1 * n;
  const double hold_end = 0.5 * n;
  if (s < ramp_end) return schedule.peak_lr * s / ramp_end;
  if (s < hold_end) return schedule.peak_lr;
  return schedule.peak_lr * std::pow(schedule.floor_ratio, (s - hold_end) / (n - hold_end));
}

}  // namespace parp::autonet
