#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "uwdt/sim/geometry.hpp"
#include "uwdt/sim/world.hpp"

namespace uwdt::obs {

// Ego-centred 4 x 41 x 50 grid at 2 m resolution. Columns run along the ego
// heading (50 cells, +-50 m), rows run laterally (41 cells, +-41 m; row index
// grows to the ego's left). Channels: presence, vx, vy, on_road.
struct OccupancyGrid {
  static constexpr int kChannels = 4;
  static constexpr int kRows = 41;
  static constexpr int kCols = 50;
  static constexpr int kCellsPerChannel = kRows * kCols;
  static constexpr int kSize = kChannels * kCellsPerChannel;
  static constexpr double kResolution = 2.0;

  enum Channel : int { presence = 0, vx = 1, vy = 2, on_road = 3 };

  std::vector<float> data = std::vector<float>(kSize, 0.0f);

  static constexpr std::size_t index(int channel, int row, int col) {
    return static_cast<std::size_t>((channel * kRows + row) * kCols + col);
  }
  float at(int channel, int row, int col) const { return data[index(channel, row, col)]; }
  float& at(int channel, int row, int col) { return data[index(channel, row, col)]; }

  // Cell centre in the ego frame (x forward, y left).
  static sim::Vec2 cell_center(int row, int col) {
    return {-50.0 + kResolution * (col + 0.5), -41.0 + kResolution * (row + 0.5)};
  }

  bool operator==(const OccupancyGrid&) const = default;
};

struct SceneVehicle {
  sim::Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double length = 5.0;
  double width = 2.0;
};

// Everything the renderer needs, decoupled from the simulator so rigid
// transforms of a scene can be rendered directly.
struct Scene {
  SceneVehicle ego;
  std::vector<SceneVehicle> others;
  std::function<bool(sim::Vec2)> on_road;
};

struct GridOptions {
  bool mark_ego = true;
  double velocity_clip = 20.0;  // m/s, mapped to +-1
};

Scene make_scene(const sim::WorldState& world);
OccupancyGrid render_grid(const Scene& scene, const GridOptions& options = {});
OccupancyGrid render_grid(const sim::WorldState& world, const GridOptions& options = {});

}  // namespace uwdt::obs
