// SPDX-License-Identifier: Apache-2.0
#include "attnkit/optim.hpp"

namespace attnkit {

double lr_at(size_t step, const LrSchedule& schedule) {
  if (schedule.total_steps < 1) throw NumericError("lr schedule: total_steps must be >= 1");
  if (schedule.warmup_steps >= schedule.total_steps)
    throw NumericError("lr schedule: warmup must end before total_steps");
  if (step > schedule.total_steps) return 0.0;
  const double peak = schedule.peak();
  if (schedule.warmup_steps > 0 && step < schedule.warmup_steps)
    return peak * static_cast<double>(step) / static_cast<double>(schedule.warmup_steps);
  double progress = static_cast<double>(step - schedule.warmup_steps) /
                    static_cast<double>(schedule.total_steps - schedule.warmup_steps);
  return peak * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace attnkit
