#pragma once

#include <optional>

namespace uwdt::sim {

struct IdmParams {
  double desired_speed = 16.0;  // v0, m/s
  double time_gap = 1.5;        // T, s
  double min_gap = 5.0;         // s0, m
  double max_accel = 3.0;       // a, m/s^2
  double comfort_decel = 3.0;   // b, m/s^2
  double exponent = 4.0;        // delta

  // Throws std::invalid_argument unless every field is positive and delta >= 1.
  void validate() const;
};

struct Leader {
  double speed = 0.0;
  double gap = 0.0;  // bumper-to-bumper, m
};

// Intelligent Driver Model acceleration, clamped to [-2b, a]. A non-positive
// gap to an existing leader is treated as imminent collision and returns -2b.
double idm_acceleration(double speed, std::optional<Leader> leader, const IdmParams& p);

}  // namespace uwdt::sim
