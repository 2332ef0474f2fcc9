#include "uwdt/sim/idm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uwdt::sim {

void IdmParams::validate() const {
  if (!(desired_speed > 0.0 && time_gap > 0.0 && min_gap > 0.0 && max_accel > 0.0 && comfort_decel > 0.0))
    throw std::invalid_argument("IdmParams: all parameters must be strictly positive");
  if (!(exponent >= 1.0)) throw std::invalid_argument("IdmParams: exponent must be >= 1");
}

double idm_acceleration(double speed, std::optional<Leader> leader, const IdmParams& p) {
  const double lo = -2.0 * p.comfort_decel;
  const double hi = p.max_accel;
  const double free_road = 1.0 - std::pow(speed / p.desired_speed, p.exponent);
  if (!leader) return std::clamp(p.max_accel * free_road, lo, hi);
  if (leader->gap <= 0.0) return lo;

  const double closing = speed - leader->speed;
  // The dynamic part of s* is floored at zero so the law stays monotone in gap.
  const double dynamic = speed * p.time_gap + speed * closing / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  const double desired_gap = p.min_gap + std::max(0.0, dynamic);
  const double ratio = desired_gap / leader->gap;
  return std::clamp(p.max_accel * (free_road - ratio * ratio), lo, hi);
}

}  // namespace uwdt::sim
