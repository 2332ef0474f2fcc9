#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "uwdt/common/rng.hpp"
#include "uwdt/reward/reward.hpp"
#include "uwdt/sim/action.hpp"
#include "uwdt/sim/geometry.hpp"
#include "uwdt/sim/idm.hpp"

namespace uwdt::sim {

inline constexpr int kPhysicsHz = 15;
inline constexpr double kPhysicsDt = 1.0 / kPhysicsHz;
inline constexpr int kMaxDecisionSteps = 22;
inline constexpr double kDecisionPeriod = 0.5;

// 15 Hz physics under a 2 Hz policy: periods alternate 8 and 7 sub-steps so
// that 22 decisions span 165 sub-steps (11 s).
constexpr int substeps_for(int decision_step) { return decision_step % 2 == 0 ? 8 : 7; }

enum class Role : std::uint8_t { ego, circulating, interacting, exiting };

struct RouteLeg {
  LaneId lane = 0;
  double begin = 0.0;
  double end = 0.0;  // ring legs may exceed the circumference (unwrapped)
};

struct Vehicle {
  int id = 0;
  Role role = Role::ego;
  std::vector<RouteLeg> route;
  std::size_t leg = 0;
  Arm destination = Arm::north;
  double offset = 0.0;       // along the current leg's lane
  double lateral = 0.0;      // left of the lane centerline
  double rel_heading = 0.0;  // heading relative to the lane tangent
  double speed = 0.0;
  double length = 5.0;
  double width = 2.0;
  IdmParams idm;

  const RouteLeg& current_leg() const { return route.at(leg); }
  LaneRef lane_ref() const;
  Vec2 position() const;
  double heading() const;
};

struct EgoControl {
  double accel = 0.0;  // m/s^2, in [-1, 1]
  double steer = 0.0;  // rad, in [-pi/36, pi/36]
};

struct ControllerGains {
  static constexpr double kSetpointStep = 2.0;
  static constexpr double kSpeedLimit = 16.0;
  static constexpr double kSpeedGain = 0.5;
  static constexpr double kLookahead = 10.0;
  static constexpr double kMaxAccel = 1.0;
  static constexpr double kMaxSteer = std::numbers::pi / 36.0;
};

struct EgoController {
  double setpoint = 8.0;
  int target_ring = -1;  // ring lane being changed into, -1 when lane keeping
};

struct ScenarioOptions {
  // When false the ego keeps driving after it reaches the north exit and the
  // episode only ends on collision or at the step cap.
  bool terminate_on_exit = false;
};

struct WorldState {
  int substep = 0;
  int decision_step = 0;
  std::vector<Vehicle> vehicles;  // ego first
  EgoController controller;
  Rng spawn_rng;
  Rng idm_rng;
  Rng policy_rng;
  bool collided = false;
  bool ego_exited = false;
  int exit_step = -1;  // decision steps completed when the exit was first reached
  ScenarioOptions options;

  double t_sim() const { return static_cast<double>(substep) / kPhysicsHz; }
  const Vehicle& ego() const { return vehicles.front(); }
  Vehicle& ego() { return vehicles.front(); }
  bool terminal() const;
};

// Sentinel for build_scenario: draw the interacting count from U{0..4}.
inline constexpr int kSampleInteracting = -1;

// Throws std::invalid_argument unless n_interact is in [0, 4] or the sentinel.
WorldState build_scenario(std::uint64_t seed, int n_interact, const ScenarioOptions& options = {});

// Routes.
std::vector<RouteLeg> route_from_entry(Arm from, int ring_index, Arm to);
std::vector<RouteLeg> route_from_ring(double ring_offset, int ring_index, Arm to);

// Updates the ego controller for a new high-level action and returns the
// control it produces for the current state.
EgoControl apply_high_level_action(Action action, WorldState& world);
EgoControl ego_control(const WorldState& world);

std::optional<Leader> find_leader(const WorldState& world, std::size_t index, double lookahead = 100.0);

struct StepResult {
  double reward = 0.0;  // scaled to [0, 1]
  double raw_reward = 0.0;
  reward::Indicators indicators;
  std::vector<double> ego_speeds;    // sub-step boundaries, first entry = state before the step
  std::vector<Vec2> ego_positions;   // same sampling as ego_speeds
  bool terminal = false;
};

// Advances one 0.5 s decision period. Throws InvalidState on a terminal world.
StepResult step_decision(WorldState& world, Action action, const reward::RewardWeights& weights = {});

struct OrientedRect {
  Vec2 center;
  double heading = 0.0;
  double length = 5.0;
  double width = 2.0;
};

OrientedRect footprint(const Vehicle& v);
// Separating-axis test; touching rectangles count as overlapping.
bool rectangles_overlap(const OrientedRect& a, const OrientedRect& b);

bool check_collision(const WorldState& world);
bool reached_exit(const WorldState& world);

}  // namespace uwdt::sim
