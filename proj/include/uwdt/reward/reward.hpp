#pragma once

namespace uwdt::reward {

struct RewardWeights {
  double collision = -1.0;    // w_c
  double speed = 0.2;         // w_v
  double lane_change = -0.05; // w_l
  double speed_band_lo = 8.0; // m/s, inclusive
  double speed_band_hi = 16.0;

  void validate() const;
};

struct Indicators {
  bool collision = false;
  bool in_speed_band = false;
  bool lane_change = false;
};

double raw_reward(const Indicators& ind, const RewardWeights& w = {});

// Affine map of the raw reward onto [0, 1]: (raw - (w_c + w_l)) / (w_v - (w_c + w_l)).
// Throws std::invalid_argument when raw lies outside [w_c + w_l, w_v].
double scale_reward(double raw, const RewardWeights& w = {});

bool in_speed_band(double speed, const RewardWeights& w = {});

}  // namespace uwdt::reward
