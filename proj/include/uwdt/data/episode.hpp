#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uwdt/obs/occupancy_grid.hpp"

namespace uwdt::data {

enum class TerminalCause : std::uint8_t { collision = 0, exit = 1, horizon = 2 };

inline constexpr int kMaxEpisodeSteps = 22;
inline constexpr int kGridValues = obs::OccupancyGrid::kSize;

// Disk/memory quantization: q = round(x * 127) as int8, x = q / 127.
std::int8_t quantize_value(float x);
inline float dequantize_value(std::int8_t q) { return static_cast<float>(q) / 127.0f; }
void quantize_grid(const obs::OccupancyGrid& grid, std::span<std::int8_t> out);
obs::OccupancyGrid dequantize_grid(std::span<const std::int8_t> q);

// One recorded trajectory. Grids are kept quantized, step-major.
struct Episode {
  std::vector<std::int8_t> grids;  // steps() x kGridValues
  std::vector<std::uint8_t> actions;
  std::vector<float> rewards;  // scaled, in [0, 1]
  TerminalCause cause = TerminalCause::horizon;

  int steps() const { return static_cast<int>(actions.size()); }
  std::span<const std::int8_t> grid(int t) const {
    return {grids.data() + static_cast<std::size_t>(t) * kGridValues, static_cast<std::size_t>(kGridValues)};
  }
  void push_step(const obs::OccupancyGrid& grid, int action, float reward);

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  bool operator==(const Episode&) const = default;
};

}  // namespace uwdt::data
