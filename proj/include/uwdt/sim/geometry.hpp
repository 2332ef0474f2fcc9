#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace uwdt::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

enum class Arm : std::uint8_t { south = 0, east = 1, north = 2, west = 3 };
inline constexpr std::array<Arm, 4> kArms{Arm::south, Arm::east, Arm::north, Arm::west};

inline constexpr int kInnerRing = 0;
inline constexpr int kOuterRing = 1;

enum class LaneKind : std::uint8_t { straight, arc, ring };
enum class LaneRole : std::uint8_t { ring, entry_straight, entry_connector, exit_connector, exit_straight };

using LaneId = int;

// A single lane centerline. Offsets run along the direction of travel; the
// lateral coordinate is positive to the left of travel.
struct Lane {
  LaneKind kind = LaneKind::straight;
  LaneRole role = LaneRole::ring;
  Arm arm = Arm::south;
  int ring_index = -1;  // ring lane this lane is, joins, or leaves; -1 for straights

  // straight
  Vec2 start;
  Vec2 direction;  // unit
  // arc / ring
  Vec2 center;
  double radius = 0.0;
  double start_angle = 0.0;
  int turn = 1;  // +1 counter-clockwise, -1 clockwise

  double length = 0.0;

  Vec2 point(double s) const;
  double heading(double s) const;
  Vec2 left_normal(double s) const;
  Vec2 position(double s, double lateral) const { return point(s) + left_normal(s) * lateral; }

  // Offset and lateral coordinate of p relative to this lane, if p projects
  // inside the lane's longitudinal extent. Ring offsets are in [0, length).
  std::optional<std::pair<double, double>> project(Vec2 p) const;
};

struct LaneRef {
  LaneId lane = 0;
  double offset = 0.0;
};

// Four-arm, two-lane roundabout centred on the origin. Traffic circulates
// counter-clockwise on an inner (r = 20 m) and an outer (r = 24 m) lane. Each
// arm carries one inbound and one outbound straight lane; inbound lanes feed
// both ring lanes and both ring lanes feed the outbound lane through circular
// connectors tangent to the straight and to the ring.
class RoundaboutGeometry {
 public:
  static constexpr double kInnerRadius = 20.0;
  static constexpr double kOuterRadius = 24.0;
  static constexpr double kLaneWidth = 4.0;
  static constexpr double kArmLength = 150.0;
  // Straights run at +-kArmOffset from the arm axis and end kJunctionDistance
  // from the ring centre, measured along the axis.
  static constexpr double kArmOffset = 2.0;
  static constexpr double kJunctionDistance = 36.0;

  static const RoundaboutGeometry& get();

  const Lane& lane(LaneId id) const { return lanes_.at(static_cast<std::size_t>(id)); }
  std::size_t lane_count() const { return lanes_.size(); }

  LaneId ring(int ring_index) const { return ring_[ring_index]; }
  LaneId entry_straight(Arm a) const { return entry_straight_[idx(a)]; }
  LaneId entry_connector(Arm a, int ring_index) const { return entry_connector_[idx(a)][ring_index]; }
  LaneId exit_connector(Arm a, int ring_index) const { return exit_connector_[idx(a)][ring_index]; }
  LaneId exit_straight(Arm a) const { return exit_straight_[idx(a)]; }

  // Ring offsets in [0, circumference) where an arm's connectors join / leave.
  double merge_offset(Arm a, int ring_index) const { return merge_offset_[idx(a)][ring_index]; }
  double diverge_offset(Arm a, int ring_index) const { return diverge_offset_[idx(a)][ring_index]; }

  double ring_radius(int ring_index) const { return ring_index == kInnerRing ? kInnerRadius : kOuterRadius; }
  double circumference(int ring_index) const;

  bool on_road(Vec2 p) const;

 private:
  RoundaboutGeometry();
  static std::size_t idx(Arm a) { return static_cast<std::size_t>(a); }
  LaneId add(Lane lane);

  std::vector<Lane> lanes_;
  std::array<LaneId, 2> ring_{};
  std::array<LaneId, 4> entry_straight_{};
  std::array<LaneId, 4> exit_straight_{};
  std::array<std::array<LaneId, 2>, 4> entry_connector_{};
  std::array<std::array<LaneId, 2>, 4> exit_connector_{};
  std::array<std::array<double, 2>, 4> merge_offset_{};
  std::array<std::array<double, 2>, 4> diverge_offset_{};
};

}  // namespace uwdt::sim
