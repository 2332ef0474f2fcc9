#include "uwdt/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "uwdt/common/errors.hpp"

namespace uwdt::sim {

namespace {

const RoundaboutGeometry& geo() { return RoundaboutGeometry::get(); }

double wrap_offset(double s, double circumference) {
  double r = std::fmod(s, circumference);
  if (r < 0.0) r += circumference;
  return r;
}

bool is_ring(LaneId id) { return geo().lane(id).kind == LaneKind::ring; }

RouteLeg ring_leg(int ring_index, double begin, Arm to) {
  const double c = geo().circumference(ring_index);
  double end = geo().diverge_offset(to, ring_index);
  while (end <= begin) end += c;
  return {geo().ring(ring_index), begin, end};
}

void append_exit(std::vector<RouteLeg>& legs, int ring_index, Arm to) {
  const Lane& conn = geo().lane(geo().exit_connector(to, ring_index));
  legs.push_back({geo().exit_connector(to, ring_index), 0.0, conn.length});
  legs.push_back({geo().exit_straight(to), 0.0, RoundaboutGeometry::kArmLength});
}

// Moves the vehicle onto the other ring lane at the same angle and rebuilds the
// rest of its route for the new lane.
void switch_ring_lane(Vehicle& v, int new_ring) {
  const Lane& old_lane = geo().lane(v.current_leg().lane);
  const double angle = v.offset / old_lane.radius;
  const double new_radius = geo().ring_radius(new_ring);
  const double new_offset = angle * new_radius;
  const double shift = new_ring == kInnerRing ? RoundaboutGeometry::kLaneWidth : -RoundaboutGeometry::kLaneWidth;

  std::vector<RouteLeg> legs(v.route.begin(), v.route.begin() + static_cast<std::ptrdiff_t>(v.leg));
  RouteLeg ring = ring_leg(new_ring, new_offset, v.destination);
  ring.begin = new_offset;
  legs.push_back(ring);
  append_exit(legs, new_ring, v.destination);
  v.route = std::move(legs);
  v.offset = new_offset;
  v.lateral -= shift;
}

// Carries offset overflow into subsequent legs. Returns false when the vehicle
// ran off the end of its route.
bool advance_legs(Vehicle& v) {
  while (v.offset > v.current_leg().end) {
    if (v.leg + 1 >= v.route.size()) {
      v.offset = v.current_leg().end;
      return false;
    }
    const double overflow = v.offset - v.current_leg().end;
    ++v.leg;
    v.offset = v.current_leg().begin + overflow;
  }
  return true;
}

Vehicle make_background(int id, Role role, std::vector<RouteLeg> route, Arm destination, double offset, double speed) {
  Vehicle v;
  v.id = id;
  v.role = role;
  v.route = std::move(route);
  v.destination = destination;
  v.offset = offset;
  v.speed = speed;
  return v;
}

Arm random_destination(Rng& rng) {
  static constexpr std::array<Arm, 3> kChoices{Arm::north, Arm::east, Arm::west};
  return kChoices[static_cast<std::size_t>(rng.uniform_int(0, 2))];
}

}  // namespace

LaneRef Vehicle::lane_ref() const {
  const LaneId lane = current_leg().lane;
  if (is_ring(lane)) return {lane, wrap_offset(offset, geo().lane(lane).length)};
  return {lane, offset};
}

Vec2 Vehicle::position() const { return geo().lane(current_leg().lane).position(offset, lateral); }

double Vehicle::heading() const { return geo().lane(current_leg().lane).heading(offset) + rel_heading; }

bool WorldState::terminal() const {
  return collided || decision_step >= kMaxDecisionSteps || (options.terminate_on_exit && ego_exited);
}

std::vector<RouteLeg> route_from_entry(Arm from, int ring_index, Arm to) {
  std::vector<RouteLeg> legs;
  legs.push_back({geo().entry_straight(from), 0.0, RoundaboutGeometry::kArmLength});
  const LaneId conn = geo().entry_connector(from, ring_index);
  legs.push_back({conn, 0.0, geo().lane(conn).length});
  legs.push_back(ring_leg(ring_index, geo().merge_offset(from, ring_index), to));
  append_exit(legs, ring_index, to);
  return legs;
}

std::vector<RouteLeg> route_from_ring(double ring_offset, int ring_index, Arm to) {
  std::vector<RouteLeg> legs;
  const double begin = wrap_offset(ring_offset, geo().circumference(ring_index));
  legs.push_back(ring_leg(ring_index, begin, to));
  append_exit(legs, ring_index, to);
  return legs;
}

WorldState build_scenario(std::uint64_t seed, int n_interact, const ScenarioOptions& options) {
  if (n_interact != kSampleInteracting && (n_interact < 0 || n_interact > 4))
    throw std::invalid_argument("build_scenario: n_interact must be in [0, 4] or the sampling sentinel");

  WorldState w;
  w.options = options;
  w.spawn_rng = Rng::derive(seed, 1);
  w.idm_rng = Rng::derive(seed, 2);
  w.policy_rng = Rng::derive(seed, 3);
  Rng& rng = w.spawn_rng;

  if (n_interact == kSampleInteracting) n_interact = static_cast<int>(rng.uniform_int(0, 4));
  const int n_circ = static_cast<int>(rng.uniform_int(0, 2));

  constexpr double kSpeedMean = 16.0;
  constexpr double kSpeedStd = 0.1;
  constexpr double kJitter = 1.0;
  constexpr double kEgoSpawn = 125.0;

  Vehicle ego;
  ego.id = 0;
  ego.role = Role::ego;
  ego.destination = Arm::north;
  ego.route = route_from_entry(Arm::south, kOuterRing, Arm::north);
  ego.offset = kEgoSpawn;
  ego.speed = 8.0;
  w.vehicles.push_back(ego);
  w.controller.setpoint = ego.speed;

  int next_id = 1;
  for (int i = 0; i < n_circ; ++i) {
    const int ring = static_cast<int>(rng.uniform_int(0, 1));
    const Arm dest = random_destination(rng);
    const double offset = RoundaboutGeometry::kArmLength - 20.0 * (i + 1) + rng.normal(0.0, kJitter);
    const double speed = rng.normal(kSpeedMean, kSpeedStd);
    w.vehicles.push_back(
        make_background(next_id++, Role::circulating, route_from_entry(Arm::west, ring, dest), dest, offset, speed));
  }

  // Interacting traffic is seeded on the ring upstream of the south merge so it
  // reaches the merge zone around the time the ego does.
  constexpr double kMinSpacing = 10.0;
  constexpr int kMaxAttempts = 32;
  for (int i = 0; i < n_interact; ++i) {
    int ring = 0;
    double offset = 0.0;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      ring = static_cast<int>(rng.uniform_int(0, 1));
      const double upstream = rng.uniform(10.0, 100.0) + rng.normal(0.0, kJitter);
      const double c = geo().circumference(ring);
      offset = wrap_offset(geo().merge_offset(Arm::south, ring) - upstream, c);
      bool clear = true;
      for (const Vehicle& other : w.vehicles) {
        if (other.role != Role::interacting || other.current_leg().lane != geo().ring(ring)) continue;
        const double d = std::abs(wrap_angle((other.lane_ref().offset - offset) / geo().ring_radius(ring)));
        if (d * geo().ring_radius(ring) < kMinSpacing) clear = false;
      }
      if (clear) break;
    }
    const Arm dest = random_destination(rng);
    const double speed = rng.normal(kSpeedMean, kSpeedStd);
    std::vector<RouteLeg> route = route_from_ring(offset, ring, dest);
    const double begin = route.front().begin;
    w.vehicles.push_back(make_background(next_id++, Role::interacting, std::move(route), dest, begin, speed));
  }

  for (int i = 0; i < 2; ++i) {
    const double offset = 50.0 + 20.0 * i + rng.normal(0.0, kJitter);
    const double speed = rng.normal(kSpeedMean, kSpeedStd);
    std::vector<RouteLeg> route{{geo().exit_straight(Arm::east), 0.0, RoundaboutGeometry::kArmLength}};
    w.vehicles.push_back(make_background(next_id++, Role::exiting, std::move(route), Arm::east, offset, speed));
  }

  // Each background driver gets its own acceleration and time-gap preference.
  for (std::size_t i = 1; i < w.vehicles.size(); ++i) {
    IdmParams& p = w.vehicles[i].idm;
    p.max_accel *= w.idm_rng.uniform(0.9, 1.1);
    p.time_gap *= w.idm_rng.uniform(0.9, 1.1);
  }
  return w;
}

EgoControl ego_control(const WorldState& world) {
  const Vehicle& ego = world.ego();
  EgoControl c;
  c.accel = std::clamp(ControllerGains::kSpeedGain * (world.controller.setpoint - ego.speed), -ControllerGains::kMaxAccel,
                       ControllerGains::kMaxAccel);
  double target_lateral = 0.0;
  const Lane& lane = geo().lane(ego.current_leg().lane);
  if (world.controller.target_ring >= 0 && lane.kind == LaneKind::ring && lane.ring_index != world.controller.target_ring)
    target_lateral = world.controller.target_ring == kInnerRing ? RoundaboutGeometry::kLaneWidth
                                                                : -RoundaboutGeometry::kLaneWidth;
  c.steer = std::clamp(std::atan2(target_lateral - ego.lateral, ControllerGains::kLookahead), -ControllerGains::kMaxSteer,
                       ControllerGains::kMaxSteer);
  return c;
}

EgoControl apply_high_level_action(Action action, WorldState& world) {
  EgoController& ctl = world.controller;
  const Lane& lane = geo().lane(world.ego().current_leg().lane);
  switch (action) {
    case Action::acc:
      ctl.setpoint = std::min(ControllerGains::kSpeedLimit, ctl.setpoint + ControllerGains::kSetpointStep);
      break;
    case Action::dec:
      ctl.setpoint = std::max(0.0, ctl.setpoint - ControllerGains::kSetpointStep);
      break;
    case Action::llc:
      if (lane.kind == LaneKind::ring && lane.ring_index == kOuterRing) ctl.target_ring = kInnerRing;
      break;
    case Action::rlc:
      if (lane.kind == LaneKind::ring && lane.ring_index == kInnerRing) ctl.target_ring = kOuterRing;
      break;
    case Action::cruise:
      break;
  }
  return ego_control(world);
}

std::optional<Leader> find_leader(const WorldState& world, std::size_t index, double lookahead) {
  const Vehicle& me = world.vehicles[index];
  double best = std::numeric_limits<double>::infinity();
  double best_speed = 0.0;
  double best_length = 0.0;
  for (std::size_t j = 0; j < world.vehicles.size(); ++j) {
    if (j == index) continue;
    const Vehicle& other = world.vehicles[j];
    const LaneId other_lane = other.current_leg().lane;
    double base = 0.0;
    for (std::size_t k = me.leg; k < me.route.size() && base <= lookahead; ++k) {
      const RouteLeg& leg = me.route[k];
      const double from = k == me.leg ? me.offset : leg.begin;
      if (leg.lane == other_lane) {
        double p;
        bool ahead;
        if (is_ring(leg.lane)) {
          p = from + wrap_offset(other.offset - from, geo().lane(leg.lane).length);
          ahead = p <= leg.end;
        } else {
          p = other.offset;
          ahead = p >= from && p <= leg.end;
        }
        if (ahead) {
          const double d = base + (p - from);
          if (d < best) {
            best = d;
            best_speed = other.speed;
            best_length = other.length;
          }
          break;
        }
      }
      base += leg.end - from;
    }
  }
  if (best > lookahead) return std::nullopt;
  return Leader{best_speed, best - 0.5 * (me.length + best_length)};
}

OrientedRect footprint(const Vehicle& v) { return {v.position(), v.heading(), v.length, v.width}; }

bool rectangles_overlap(const OrientedRect& a, const OrientedRect& b) {
  const Vec2 axes[4] = {unit(a.heading), unit(a.heading + 0.5 * std::numbers::pi), unit(b.heading),
                        unit(b.heading + 0.5 * std::numbers::pi)};
  const Vec2 d = b.center - a.center;
  for (const Vec2& axis : axes) {
    const double ra = 0.5 * a.length * std::abs(unit(a.heading).dot(axis)) +
                      0.5 * a.width * std::abs(unit(a.heading + 0.5 * std::numbers::pi).dot(axis));
    const double rb = 0.5 * b.length * std::abs(unit(b.heading).dot(axis)) +
                      0.5 * b.width * std::abs(unit(b.heading + 0.5 * std::numbers::pi).dot(axis));
    if (std::abs(d.dot(axis)) > ra + rb) return false;
  }
  return true;
}

bool check_collision(const WorldState& world) {
  const OrientedRect ego = footprint(world.ego());
  for (std::size_t i = 1; i < world.vehicles.size(); ++i)
    if (rectangles_overlap(ego, footprint(world.vehicles[i]))) return true;
  return false;
}

bool reached_exit(const WorldState& world) {
  const Lane& lane = geo().lane(world.ego().current_leg().lane);
  return lane.arm == Arm::north && (lane.role == LaneRole::exit_connector || lane.role == LaneRole::exit_straight);
}

StepResult step_decision(WorldState& world, Action action, const reward::RewardWeights& weights) {
  if (world.terminal()) throw InvalidState("step_decision: world is terminal");

  StepResult result;
  apply_high_level_action(action, world);
  const int n_sub = substeps_for(world.decision_step);
  result.ego_speeds.reserve(static_cast<std::size_t>(n_sub) + 1);
  result.ego_positions.reserve(static_cast<std::size_t>(n_sub) + 1);
  result.ego_speeds.push_back(world.ego().speed);
  result.ego_positions.push_back(world.ego().position());

  bool collided_now = false;
  std::vector<double> accel(world.vehicles.size());
  for (int sub = 0; sub < n_sub; ++sub) {
    const EgoControl control = ego_control(world);
    accel[0] = control.accel;
    accel.resize(world.vehicles.size());
    for (std::size_t i = 1; i < world.vehicles.size(); ++i) {
      const Vehicle& v = world.vehicles[i];
      accel[i] = idm_acceleration(v.speed, find_leader(world, i), v.idm);
    }

    for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
      Vehicle& v = world.vehicles[i];
      const double v1 = std::max(0.0, v.speed + accel[i] * kPhysicsDt);
      const double mean_speed = 0.5 * (v.speed + v1);
      if (i == 0) {
        v.offset += mean_speed * std::cos(control.steer) * kPhysicsDt;
        v.lateral += mean_speed * std::sin(control.steer) * kPhysicsDt;
        v.rel_heading = control.steer;
      } else {
        v.offset += mean_speed * kPhysicsDt;
      }
      v.speed = v1;
    }

    // Ego lane change completes once it is closer to the target lane.
    Vehicle& ego = world.ego();
    const int target = world.controller.target_ring;
    if (target >= 0) {
      const Lane& lane = geo().lane(ego.current_leg().lane);
      if (lane.kind != LaneKind::ring) {
        world.controller.target_ring = -1;
      } else if (lane.ring_index == target) {
        world.controller.target_ring = -1;
      } else if ((target == kInnerRing && ego.lateral >= 0.5 * RoundaboutGeometry::kLaneWidth) ||
                 (target == kOuterRing && ego.lateral <= -0.5 * RoundaboutGeometry::kLaneWidth)) {
        switch_ring_lane(ego, target);
        world.controller.target_ring = -1;
      }
    }
    if (!advance_legs(ego)) ego.speed = 0.0;
    if (world.controller.target_ring >= 0 && !is_ring(ego.current_leg().lane)) world.controller.target_ring = -1;

    for (std::size_t i = world.vehicles.size(); i-- > 1;) {
      if (!advance_legs(world.vehicles[i])) world.vehicles.erase(world.vehicles.begin() + static_cast<std::ptrdiff_t>(i));
    }

    ++world.substep;
    result.ego_speeds.push_back(ego.speed);
    result.ego_positions.push_back(ego.position());

    if (!world.ego_exited && reached_exit(world)) {
      world.ego_exited = true;
      world.exit_step = world.decision_step + 1;
    }
    if (!world.ego_exited && check_collision(world)) {
      world.collided = true;
      collided_now = true;
      break;
    }
  }

  ++world.decision_step;
  result.indicators.collision = collided_now;
  result.indicators.in_speed_band = reward::in_speed_band(world.ego().speed, weights);
  result.indicators.lane_change = is_lane_change(action);
  result.raw_reward = reward::raw_reward(result.indicators, weights);
  result.reward = reward::scale_reward(result.raw_reward, weights);
  result.terminal = world.terminal();
  return result;
}

}  // namespace uwdt::sim
