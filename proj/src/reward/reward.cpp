#include "uwdt/reward/reward.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace uwdt::reward {

void RewardWeights::validate() const {
  if (!(collision < 0.0 && lane_change < 0.0 && speed > 0.0))
    throw std::invalid_argument("RewardWeights: require w_c < 0, w_l < 0, w_v > 0");
  if (!(speed_band_lo <= speed_band_hi)) throw std::invalid_argument("RewardWeights: empty speed band");
}

double raw_reward(const Indicators& ind, const RewardWeights& w) {
  return w.collision * (ind.collision ? 1.0 : 0.0) + w.speed * (ind.in_speed_band ? 1.0 : 0.0) +
         w.lane_change * (ind.lane_change ? 1.0 : 0.0);
}

double scale_reward(double raw, const RewardWeights& w) {
  const double lo = w.collision + w.lane_change;
  const double hi = w.speed;
  constexpr double kSlack = 1e-12;
  if (raw < lo - kSlack || raw > hi + kSlack)
    throw std::invalid_argument("scale_reward: raw reward " + std::to_string(raw) + " outside [w_c + w_l, w_v]");
  return std::clamp((raw - lo) / (hi - lo), 0.0, 1.0);
}

bool in_speed_band(double speed, const RewardWeights& w) {
  return speed >= w.speed_band_lo && speed <= w.speed_band_hi;
}

}  // namespace uwdt::reward
