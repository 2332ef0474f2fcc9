#include "uwdt/obs/occupancy_grid.hpp"

#include <algorithm>
#include <cmath>

namespace uwdt::obs {

namespace {

using sim::Vec2;

void stamp(OccupancyGrid& grid, const SceneVehicle& ego, const SceneVehicle& v, double clip) {
  const Vec2 fwd = sim::unit(ego.heading);
  const Vec2 left{-fwd.y, fwd.x};
  const Vec2 rel = v.position - ego.position;
  const Vec2 c{rel.dot(fwd), rel.dot(left)};  // vehicle centre in ego frame
  const double h = v.heading - ego.heading;
  const Vec2 axis = sim::unit(h);
  const Vec2 side{-axis.y, axis.x};

  const Vec2 velocity = sim::unit(v.heading) * v.speed;
  const float vx = static_cast<float>(std::clamp(velocity.dot(fwd), -clip, clip) / clip);
  const float vy = static_cast<float>(std::clamp(velocity.dot(left), -clip, clip) / clip);

  // Bounding box of the footprint in cell indices, then exact centre test.
  const double reach = 0.5 * std::hypot(v.length, v.width);
  const double res = OccupancyGrid::kResolution;
  const int col_lo = std::max(0, static_cast<int>(std::floor((c.x - reach + 50.0) / res)));
  const int col_hi = std::min(OccupancyGrid::kCols - 1, static_cast<int>(std::floor((c.x + reach + 50.0) / res)));
  const int row_lo = std::max(0, static_cast<int>(std::floor((c.y - reach + 41.0) / res)));
  const int row_hi = std::min(OccupancyGrid::kRows - 1, static_cast<int>(std::floor((c.y + reach + 41.0) / res)));
  for (int row = row_lo; row <= row_hi; ++row) {
    for (int col = col_lo; col <= col_hi; ++col) {
      const Vec2 d = OccupancyGrid::cell_center(row, col) - c;
      if (std::abs(d.dot(axis)) > 0.5 * v.length || std::abs(d.dot(side)) > 0.5 * v.width) continue;
      grid.at(OccupancyGrid::presence, row, col) = 1.0f;
      grid.at(OccupancyGrid::vx, row, col) = vx;
      grid.at(OccupancyGrid::vy, row, col) = vy;
    }
  }
}

}  // namespace

Scene make_scene(const sim::WorldState& world) {
  Scene scene;
  auto to_scene = [](const sim::Vehicle& v) {
    return SceneVehicle{v.position(), v.heading(), v.speed, v.length, v.width};
  };
  scene.ego = to_scene(world.ego());
  for (std::size_t i = 1; i < world.vehicles.size(); ++i) scene.others.push_back(to_scene(world.vehicles[i]));
  scene.on_road = [](Vec2 p) { return sim::RoundaboutGeometry::get().on_road(p); };
  return scene;
}

OccupancyGrid render_grid(const Scene& scene, const GridOptions& options) {
  OccupancyGrid grid;
  const Vec2 fwd = sim::unit(scene.ego.heading);
  const Vec2 left{-fwd.y, fwd.x};
  if (scene.on_road) {
    for (int row = 0; row < OccupancyGrid::kRows; ++row) {
      for (int col = 0; col < OccupancyGrid::kCols; ++col) {
        const Vec2 local = OccupancyGrid::cell_center(row, col);
        const Vec2 world = scene.ego.position + fwd * local.x + left * local.y;
        if (scene.on_road(world)) grid.at(OccupancyGrid::on_road, row, col) = 1.0f;
      }
    }
  }
  if (options.mark_ego) stamp(grid, scene.ego, scene.ego, options.velocity_clip);
  for (const SceneVehicle& v : scene.others) stamp(grid, scene.ego, v, options.velocity_clip);
  return grid;
}

OccupancyGrid render_grid(const sim::WorldState& world, const GridOptions& options) {
  return render_grid(make_scene(world), options);
}

}  // namespace uwdt::obs
