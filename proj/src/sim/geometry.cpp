#include "uwdt/sim/geometry.hpp"

#include <numbers>

namespace uwdt::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_positive(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

// Exact quarter-turn rotation about the origin.
Vec2 rotate_quarter(Vec2 p, int quarters) {
  for (int i = 0; i < quarters; ++i) p = {-p.y, p.x};
  return p;
}

}  // namespace

double wrap_angle(double a) {
  double r = wrap_positive(a + kPi);
  return r - kPi;
}

Vec2 Lane::point(double s) const {
  if (kind == LaneKind::straight) return start + direction * s;
  return center + unit(start_angle + turn * s / radius) * radius;
}

double Lane::heading(double s) const {
  if (kind == LaneKind::straight) return std::atan2(direction.y, direction.x);
  return start_angle + turn * (s / radius + 0.5 * kPi);
}

Vec2 Lane::left_normal(double s) const {
  if (kind == LaneKind::straight) return {-direction.y, direction.x};
  const Vec2 radial = unit(start_angle + turn * s / radius);
  return turn > 0 ? radial * -1.0 : radial;
}

std::optional<std::pair<double, double>> Lane::project(Vec2 p) const {
  if (kind == LaneKind::straight) {
    const Vec2 v = p - start;
    const double s = v.dot(direction);
    if (s < 0.0 || s > length) return std::nullopt;
    return std::make_pair(s, direction.cross(v));
  }
  const Vec2 v = p - center;
  const double r = v.norm();
  const double delta = wrap_positive(turn * (std::atan2(v.y, v.x) - start_angle));
  const double s = delta * radius;
  const double lateral = turn * (radius - r);
  if (kind == LaneKind::ring) return std::make_pair(s >= length ? 0.0 : s, lateral);
  if (s > length) return std::nullopt;
  return std::make_pair(s, lateral);
}

const RoundaboutGeometry& RoundaboutGeometry::get() {
  static const RoundaboutGeometry geometry;
  return geometry;
}

double RoundaboutGeometry::circumference(int ring_index) const { return lane(ring(ring_index)).length; }

LaneId RoundaboutGeometry::add(Lane lane) {
  lanes_.push_back(lane);
  return static_cast<LaneId>(lanes_.size() - 1);
}

RoundaboutGeometry::RoundaboutGeometry() {
  for (int r = 0; r < 2; ++r) {
    Lane ring_lane;
    ring_lane.kind = LaneKind::ring;
    ring_lane.role = LaneRole::ring;
    ring_lane.ring_index = r;
    ring_lane.center = {0.0, 0.0};
    ring_lane.radius = ring_radius(r);
    ring_lane.start_angle = 0.0;
    ring_lane.turn = 1;
    ring_lane.length = kTwoPi * ring_lane.radius;
    ring_[r] = add(ring_lane);
  }

  const double a = kArmOffset;
  const double y = kJunctionDistance;
  for (Arm arm : kArms) {
    const int q = static_cast<int>(arm);
    const double rot = q * 0.5 * kPi;

    // Arm-local geometry is built for the south arm and rotated into place.
    Lane in;
    in.kind = LaneKind::straight;
    in.role = LaneRole::entry_straight;
    in.arm = arm;
    in.start = rotate_quarter({a, -y - kArmLength}, q);
    in.direction = rotate_quarter({0.0, 1.0}, q);
    in.length = kArmLength;
    entry_straight_[idx(arm)] = add(in);

    Lane out;
    out.kind = LaneKind::straight;
    out.role = LaneRole::exit_straight;
    out.arm = arm;
    out.start = rotate_quarter({-a, -y}, q);
    out.direction = rotate_quarter({0.0, -1.0}, q);
    out.length = kArmLength;
    exit_straight_[idx(arm)] = add(out);

    for (int r = 0; r < 2; ++r) {
      const double ring_r = ring_radius(r);
      // Connector radius that is tangent to both the straight end and the ring.
      const double rho = (y * y - ring_r * ring_r + a * a) / (2.0 * (ring_r - a));
      const double end_angle = std::atan2(y, -(a + rho));

      Lane entry;
      entry.kind = LaneKind::arc;
      entry.role = LaneRole::entry_connector;
      entry.arm = arm;
      entry.ring_index = r;
      entry.center = rotate_quarter({a + rho, -y}, q);
      entry.radius = rho;
      entry.turn = -1;
      entry.start_angle = kPi + rot;
      entry.length = rho * (kPi - end_angle);
      entry_connector_[idx(arm)][r] = add(entry);
      merge_offset_[idx(arm)][r] = ring_r * wrap_positive(std::atan2(-y, a + rho) + rot);

      Lane exit;
      exit.kind = LaneKind::arc;
      exit.role = LaneRole::exit_connector;
      exit.arm = arm;
      exit.ring_index = r;
      exit.center = rotate_quarter({-(a + rho), -y}, q);
      exit.radius = rho;
      exit.turn = -1;
      exit.start_angle = (kPi - end_angle) + rot;
      exit.length = rho * (kPi - end_angle);
      exit_connector_[idx(arm)][r] = add(exit);
      diverge_offset_[idx(arm)][r] = ring_r * wrap_positive(std::atan2(-y, -(a + rho)) + rot);
    }
  }
}

bool RoundaboutGeometry::on_road(Vec2 p) const {
  const double half = 0.5 * kLaneWidth;
  for (const Lane& l : lanes_) {
    const auto proj = l.project(p);
    if (proj && std::abs(proj->second) <= half) return true;
  }
  return false;
}

}  // namespace uwdt::sim
