#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "support.hpp"
#include "uwdt/common/errors.hpp"
#include "uwdt/sim/geometry.hpp"
#include "uwdt/sim/idm.hpp"
#include "uwdt/sim/world.hpp"

using namespace uwdt;
using namespace uwdt::sim;
using uwdt::testing::empty_world;
using uwdt::testing::parked_ahead;

namespace {

const RoundaboutGeometry& geo() { return RoundaboutGeometry::get(); }

double heading_gap(double a, double b) { return std::abs(wrap_angle(a - b)); }

int count_role(const WorldState& w, Role r) {
  return static_cast<int>(std::count_if(w.vehicles.begin(), w.vehicles.end(), [r](const Vehicle& v) { return v.role == r; }));
}

bool same_state(const WorldState& a, const WorldState& b) {
  if (a.vehicles.size() != b.vehicles.size()) return false;
  if (a.substep != b.substep || a.decision_step != b.decision_step || a.collided != b.collided ||
      a.ego_exited != b.ego_exited || a.exit_step != b.exit_step)
    return false;
  if (!(a.spawn_rng == b.spawn_rng) || !(a.idm_rng == b.idm_rng) || !(a.policy_rng == b.policy_rng)) return false;
  for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
    const auto& u = a.vehicles[i];
    const auto& v = b.vehicles[i];
    if (u.id != v.id || u.leg != v.leg || u.offset != v.offset || u.lateral != v.lateral ||
        u.rel_heading != v.rel_heading || u.speed != v.speed || u.idm.max_accel != v.idm.max_accel ||
        u.idm.time_gap != v.idm.time_gap || u.route.size() != v.route.size())
      return false;
  }
  return a.controller.setpoint == b.controller.setpoint && a.controller.target_ring == b.controller.target_ring;
}

// Reference overlap by point sampling: any sample of `a` on a 1 cm lattice
// (boundary included) that lies inside `b`.
bool sampled_overlap(const OrientedRect& a, const OrientedRect& b, double inflate_b = 0.0) {
  const Vec2 ax = unit(a.heading), ay = unit(a.heading + std::numbers::pi / 2);
  const Vec2 bx = unit(b.heading), by = unit(b.heading + std::numbers::pi / 2);
  const double hl = 0.5 * b.length + inflate_b, hw = 0.5 * b.width + inflate_b;
  const int nl = static_cast<int>(std::round(a.length / 0.01));
  const int nw = static_cast<int>(std::round(a.width / 0.01));
  for (int i = 0; i <= nl; ++i) {
    const double u = -0.5 * a.length + a.length * i / nl;
    for (int j = 0; j <= nw; ++j) {
      const double v = -0.5 * a.width + a.width * j / nw;
      const Vec2 p = a.center + ax * u + ay * v - b.center;
      if (std::abs(p.dot(bx)) <= hl && std::abs(p.dot(by)) <= hw) return true;
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("radii and arm layout") {
    CHECK(RoundaboutGeometry::kInnerRadius < RoundaboutGeometry::kOuterRadius);
    CHECK(geo().ring_radius(kInnerRing) == 20.0);
    CHECK(geo().ring_radius(kOuterRing) == 24.0);
    for (Arm a : kArms) CHECK(geo().lane(geo().entry_straight(a)).length == doctest::Approx(150.0));
  }

  TEST_CASE("lane junctions are continuous in position and heading") {
    double worst_gap = 0.0, worst_heading = 0.0;
    auto join = [&](LaneId from, double from_s, LaneId to, double to_s) {
      const Lane& a = geo().lane(from);
      const Lane& b = geo().lane(to);
      worst_gap = std::max(worst_gap, (a.point(from_s) - b.point(to_s)).norm());
      worst_heading = std::max(worst_heading, heading_gap(a.heading(from_s), b.heading(to_s)));
    };
    for (Arm arm : kArms) {
      for (int ring : {kInnerRing, kOuterRing}) {
        const LaneId in = geo().entry_straight(arm);
        const LaneId ec = geo().entry_connector(arm, ring);
        const LaneId xc = geo().exit_connector(arm, ring);
        const LaneId out = geo().exit_straight(arm);
        join(in, geo().lane(in).length, ec, 0.0);
        join(ec, geo().lane(ec).length, geo().ring(ring), geo().merge_offset(arm, ring));
        join(geo().ring(ring), geo().diverge_offset(arm, ring), xc, 0.0);
        join(xc, geo().lane(xc).length, out, 0.0);
      }
    }
    CHECK(worst_gap < 1e-6);
    CHECK(worst_heading < 1e-9);
  }

  TEST_CASE("every lane point projects back to its own offset") {
    for (std::size_t id = 0; id < geo().lane_count(); ++id) {
      const Lane& lane = geo().lane(static_cast<LaneId>(id));
      for (int k = 0; k <= 10; ++k) {
        const double s = lane.length * (0.05 + 0.09 * k);
        const auto proj = lane.project(lane.point(s));
        REQUIRE(proj.has_value());
        CHECK(proj->first == doctest::Approx(s).epsilon(1e-9));
        CHECK(std::abs(proj->second) < 1e-9);
      }
    }
  }

  TEST_CASE("wrap_angle range") {
    for (double a : {-10.0, -std::numbers::pi, 0.0, 3.0, std::numbers::pi, 7.5}) {
      const double w = wrap_angle(a);
      CHECK(w >= -std::numbers::pi);
      CHECK(w < std::numbers::pi);
      CHECK(std::abs(std::sin(w) - std::sin(a)) < 1e-12);
    }
  }
}

TEST_SUITE("idm") {
  TEST_CASE("free-road equilibrium and standstill") {
    const IdmParams p;
    CHECK(idm_acceleration(p.desired_speed, std::nullopt, p) == doctest::Approx(0.0));
    CHECK(idm_acceleration(0.0, std::nullopt, p) == doctest::Approx(p.max_accel));
  }

  TEST_CASE("equilibrium-gap substitution") {
    const IdmParams p;
    const double v = 16.0;
    const double gap = p.min_gap + v * p.time_gap;
    // s* equals the gap when the closing speed is zero.
    const double expected = p.max_accel * (1.0 - std::pow(v / p.desired_speed, p.exponent) - 1.0);
    CHECK(idm_acceleration(v, Leader{16.0, gap}, p) == doctest::Approx(std::clamp(expected, -2 * p.comfort_decel, p.max_accel)));
  }

  TEST_CASE("non-positive gap returns the emergency clamp") {
    const IdmParams p;
    CHECK(idm_acceleration(10.0, Leader{0.0, 0.0}, p) == -2.0 * p.comfort_decel);
    CHECK(idm_acceleration(10.0, Leader{0.0, -1.0}, p) == -2.0 * p.comfort_decel);
  }

  TEST_CASE("output is bounded, continuous and non-decreasing in gap") {
    const IdmParams p;
    for (double v : {0.0, 4.0, 12.0, 16.0}) {
      for (double lead : {0.0, 8.0, 16.0}) {
        double prev = -1e9;
        for (double gap = 0.01; gap < 200.0; gap += 0.01) {
          const double a = idm_acceleration(v, Leader{lead, gap}, p);
          CHECK_MESSAGE(a >= prev - 1e-12, "v=" << v << " lead=" << lead << " gap=" << gap);
          CHECK(a >= -2 * p.comfort_decel);
          CHECK(a <= p.max_accel);
          CHECK(std::abs(idm_acceleration(v, Leader{lead, gap + 1e-7}, p) - a) < 1e-3);
          prev = a;
        }
      }
    }
  }

  TEST_CASE("parameter validation") {
    IdmParams p;
    CHECK_NOTHROW(p.validate());
    p.exponent = 0.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = IdmParams{};
    p.time_gap = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_SUITE("scenario") {
  TEST_CASE("interacting count follows the argument") {
    const auto w0 = build_scenario(7, 0);
    CHECK(count_role(w0, Role::interacting) == 0);
    CHECK(count_role(w0, Role::exiting) == 2);
    const int circ = count_role(w0, Role::circulating);
    CHECK(circ >= 0);
    CHECK(circ <= 2);
    const auto w4 = build_scenario(7, 4);
    CHECK(count_role(w4, Role::interacting) == 4);
    CHECK(count_role(w4, Role::exiting) == 2);
  }

  TEST_CASE("ego spawn") {
    const auto w = build_scenario(11, kSampleInteracting);
    const Vehicle& ego = w.ego();
    CHECK(ego.role == Role::ego);
    CHECK(ego.speed == 8.0);
    CHECK(ego.current_leg().lane == geo().entry_straight(Arm::south));
    CHECK(ego.destination == Arm::north);
    CHECK(w.decision_step == 0);
    CHECK_FALSE(w.collided);
    CHECK_FALSE(w.ego_exited);
  }

  TEST_CASE("out-of-range interacting count is rejected") {
    CHECK_THROWS_AS(build_scenario(7, 5), std::invalid_argument);
    CHECK_THROWS_AS(build_scenario(7, -2), std::invalid_argument);
  }

  TEST_CASE("identical seeds give identical worlds") {
    for (std::uint64_t s : {0ull, 7ull, 123456789ull, ~0ull}) {
      CHECK(same_state(build_scenario(s, kSampleInteracting), build_scenario(s, kSampleInteracting)));
    }
  }

  TEST_CASE("sampled interacting counts are uniform and background speeds stay near 16") {
    std::array<int, 5> hist{};
    double lo = 1e9, hi = -1e9;
    long long speeds = 0;
    const int n = 10000;
    for (int s = 0; s < n; ++s) {
      const auto w = build_scenario(static_cast<std::uint64_t>(s), kSampleInteracting);
      hist[static_cast<std::size_t>(count_role(w, Role::interacting))]++;
      for (std::size_t i = 1; i < w.vehicles.size(); ++i) {
        lo = std::min(lo, w.vehicles[i].speed);
        hi = std::max(hi, w.vehicles[i].speed);
        ++speeds;
      }
      for (std::size_t i = 1; i < w.vehicles.size(); ++i) CHECK_NOTHROW(w.vehicles[i].idm.validate());
    }
    for (int k = 0; k < 5; ++k) CHECK(std::abs(hist[static_cast<std::size_t>(k)] / double(n) - 0.2) <= 0.02);
    CHECK(speeds > 10000);
    CHECK(lo >= 15.0);
    CHECK(hi <= 17.0);
  }
}

TEST_SUITE("controller") {
  TEST_CASE("cruise at the setpoint on the centerline is neutral") {
    auto w = empty_world();
    REQUIRE(w.controller.setpoint == w.ego().speed);
    const EgoControl c = apply_high_level_action(Action::cruise, w);
    CHECK(c.accel == doctest::Approx(0.0));
    CHECK(c.steer == doctest::Approx(0.0));
  }

  TEST_CASE("acc at the setpoint is min(1, gain * step)") {
    auto w = empty_world();
    const EgoControl c = apply_high_level_action(Action::acc, w);
    const double expected = std::min(ControllerGains::kMaxAccel, ControllerGains::kSpeedGain * ControllerGains::kSetpointStep);
    CHECK(c.accel == doctest::Approx(expected));
    CHECK(w.controller.setpoint == doctest::Approx(10.0));
  }

  TEST_CASE("dec lowers the setpoint and brakes") {
    auto w = empty_world();
    const EgoControl c = apply_high_level_action(Action::dec, w);
    CHECK(c.accel == doctest::Approx(-1.0));
    CHECK(w.controller.setpoint == doctest::Approx(6.0));
  }

  TEST_CASE("setpoint stays within [0, 16]") {
    auto w = empty_world();
    for (int k = 0; k < 10; ++k) apply_high_level_action(Action::acc, w);
    CHECK(w.controller.setpoint == 16.0);
    for (int k = 0; k < 10; ++k) apply_high_level_action(Action::dec, w);
    CHECK(w.controller.setpoint == 0.0);
  }

  TEST_CASE("infeasible lane changes degrade to cruise") {
    // On the single-lane approach neither direction is available.
    for (Action lc : {Action::llc, Action::rlc}) {
      auto a = empty_world();
      auto b = empty_world();
      const EgoControl ca = apply_high_level_action(lc, a);
      const EgoControl cb = apply_high_level_action(Action::cruise, b);
      CHECK(ca.accel == cb.accel);
      CHECK(ca.steer == cb.steer);
      CHECK(a.controller.target_ring == -1);
    }
    // llc from the inner (leftmost) ring lane.
    auto a = empty_world();
    Vehicle& ego = a.ego();
    ego.route = route_from_ring(10.0, kInnerRing, Arm::north);
    ego.leg = 0;
    ego.offset = ego.route.front().begin;
    auto b = a;
    const EgoControl ca = apply_high_level_action(Action::llc, a);
    const EgoControl cb = apply_high_level_action(Action::cruise, b);
    CHECK(ca.accel == cb.accel);
    CHECK(ca.steer == cb.steer);
  }

  TEST_CASE("controls stay within their ranges") {
    Rng rng(5);
    for (int ep = 0; ep < 20; ++ep) {
      auto w = build_scenario(static_cast<std::uint64_t>(ep), kSampleInteracting);
      while (!w.terminal()) {
        const Action a = static_cast<Action>(rng.uniform_int(0, 4));
        auto probe = w;
        const EgoControl c = apply_high_level_action(a, probe);
        CHECK(std::abs(c.accel) <= 1.0);
        CHECK(std::abs(c.steer) <= std::numbers::pi / 36.0 + 1e-15);
        step_decision(w, a);
      }
    }
  }
}

TEST_SUITE("stepping") {
  TEST_CASE("sub-step schedule spans 11 s") {
    int total = 0;
    for (int k = 0; k < kMaxDecisionSteps; ++k) total += substeps_for(k);
    CHECK(total == 165);
    CHECK(substeps_for(0) == 8);
    CHECK(substeps_for(1) == 7);
  }

  TEST_CASE("empty road, cruise to the cap") {
    auto w = empty_world();
    int steps = 0;
    while (!w.terminal()) {
      const auto r = step_decision(w, Action::cruise);
      ++steps;
      CHECK(r.ego_speeds.size() == static_cast<std::size_t>(substeps_for(steps - 1) + 1));
    }
    CHECK(steps == 22);
    CHECK(w.decision_step == 22);
    CHECK_FALSE(w.collided);
    CHECK(w.t_sim() == 11.0);
    CHECK_THROWS_AS(step_decision(w, Action::cruise), InvalidState);
  }

  TEST_CASE("ego 1 m behind a stopped vehicle collides in the first period") {
    auto w = empty_world();
    w.vehicles.push_back(parked_ahead(w, 1.0));
    const auto r = step_decision(w, Action::acc);
    CHECK(w.collided);
    CHECK(r.terminal);
    CHECK(r.indicators.collision);
    // Still inside the speed band at impact, so collision plus speed bonus.
    CHECK(r.indicators.in_speed_band);
    CHECK(r.reward == doctest::Approx(0.2));
    CHECK_FALSE(w.ego_exited);
  }

  TEST_CASE("identical action sequences give identical traces") {
    for (std::uint64_t seed : {3ull, 99ull, 2024ull}) {
      Rng actions(seed);
      std::vector<Action> seq;
      for (int k = 0; k < 22; ++k) seq.push_back(static_cast<Action>(actions.uniform_int(0, 4)));
      auto a = build_scenario(seed, kSampleInteracting);
      auto b = build_scenario(seed, kSampleInteracting);
      for (Action act : seq) {
        if (a.terminal()) break;
        const auto ra = step_decision(a, act);
        const auto rb = step_decision(b, act);
        CHECK(ra.reward == rb.reward);
        CHECK(ra.ego_speeds == rb.ego_speeds);
        REQUIRE(same_state(a, b));
      }
    }
  }

  TEST_CASE("termination flags are exclusive and episodes are capped") {
    Rng rng(17);
    for (int ep = 0; ep < 200; ++ep) {
      auto w = build_scenario(static_cast<std::uint64_t>(1000 + ep), kSampleInteracting);
      int steps = 0;
      double total = 0.0;
      while (!w.terminal()) {
        const auto r = step_decision(w, static_cast<Action>(rng.uniform_int(0, 4)));
        total += r.reward;
        ++steps;
        CHECK(r.reward >= 0.0);
        CHECK(r.reward <= 1.0);
        for (double v : r.ego_speeds) CHECK(v >= 0.0);
      }
      CHECK_FALSE((w.collided && w.ego_exited));
      CHECK(steps <= 22);
      CHECK(total <= 22.0);
      if (!w.collided) CHECK(w.t_sim() == 11.0);
    }
  }
}

TEST_SUITE("collision") {
  TEST_CASE("separated and identical poses") {
    const OrientedRect a{{0.0, 0.0}, 0.3};
    OrientedRect b = a;
    CHECK(rectangles_overlap(a, b));
    b.center = {50.0, 0.0};
    CHECK_FALSE(rectangles_overlap(a, b));
  }

  TEST_CASE("corner contact at 45 degrees") {
    const OrientedRect a{{0.0, 0.0}, 0.0};
    // b's corner at (0, -half diagonal) in its own frame, rotated by 45 degrees.
    const double h = std::numbers::pi / 4;
    const Vec2 corner_local{-2.5, -1.0};
    const Vec2 corner_world{corner_local.x * std::cos(h) - corner_local.y * std::sin(h),
                            corner_local.x * std::sin(h) + corner_local.y * std::cos(h)};
    const Vec2 target{2.5, 1.0};  // a's front-left corner
    for (double shift : {-0.02, 0.02}) {
      const Vec2 dir = unit(h);
      OrientedRect b{target - corner_world + dir * shift, h};
      const bool expected = sampled_overlap(a, b) || sampled_overlap(b, a);
      CHECK(rectangles_overlap(a, b) == expected);
      CHECK(expected == (shift < 0.0));
    }
  }

  TEST_CASE("agrees with the sampling oracle on random pairs") {
    Rng rng(42);
    int checked = 0, overlapping = 0;
    while (checked < 1000) {
      OrientedRect a{{0.0, 0.0}, rng.uniform(-std::numbers::pi, std::numbers::pi)};
      OrientedRect b{{rng.uniform(-6.0, 6.0), rng.uniform(-4.0, 4.0)}, rng.uniform(-std::numbers::pi, std::numbers::pi)};
      // Skip configurations within 2 cm of contact, where a lattice cannot decide.
      const bool outer = sampled_overlap(a, b, 0.02) || sampled_overlap(b, a, 0.02);
      const bool inner = sampled_overlap(a, b, -0.02) || sampled_overlap(b, a, -0.02);
      if (outer != inner) continue;
      ++checked;
      overlapping += inner;
      CHECK(rectangles_overlap(a, b) == inner);
      CHECK(rectangles_overlap(b, a) == inner);
    }
    CHECK(overlapping > 100);
    CHECK(overlapping < 900);
  }
}
