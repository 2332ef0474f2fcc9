#include "uwdt/data/episode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uwdt::data {

std::int8_t quantize_value(float x) {
  const float clamped = std::clamp(x, -1.0f, 1.0f);
  return static_cast<std::int8_t>(std::lround(clamped * 127.0f));
}

void quantize_grid(const obs::OccupancyGrid& grid, std::span<std::int8_t> out) {
  if (out.size() != static_cast<std::size_t>(kGridValues)) throw std::invalid_argument("quantize_grid: bad output size");
  for (int i = 0; i < kGridValues; ++i) out[static_cast<std::size_t>(i)] = quantize_value(grid.data[static_cast<std::size_t>(i)]);
}

obs::OccupancyGrid dequantize_grid(std::span<const std::int8_t> q) {
  if (q.size() != static_cast<std::size_t>(kGridValues)) throw std::invalid_argument("dequantize_grid: bad input size");
  obs::OccupancyGrid g;
  for (int i = 0; i < kGridValues; ++i) g.data[static_cast<std::size_t>(i)] = dequantize_value(q[static_cast<std::size_t>(i)]);
  return g;
}

void Episode::push_step(const obs::OccupancyGrid& grid, int action, float reward) {
  const std::size_t at = grids.size();
  grids.resize(at + static_cast<std::size_t>(kGridValues));
  quantize_grid(grid, std::span<std::int8_t>(grids.data() + at, static_cast<std::size_t>(kGridValues)));
  actions.push_back(static_cast<std::uint8_t>(action));
  rewards.push_back(reward);
}

void Episode::validate() const {
  const int t = steps();
  if (t < 1 || t > kMaxEpisodeSteps)
    throw std::invalid_argument("episode length " + std::to_string(t) + " outside [1, 22]");
  if (rewards.size() != actions.size() || grids.size() != actions.size() * static_cast<std::size_t>(kGridValues))
    throw std::invalid_argument("episode arrays have mismatched lengths");
  for (std::uint8_t a : actions)
    if (a >= 5) throw std::invalid_argument("episode action id out of range");
  for (float r : rewards)
    if (!(r >= 0.0f && r <= 1.0f)) throw std::invalid_argument("episode reward outside [0, 1]");
  if (static_cast<int>(cause) > 2) throw std::invalid_argument("episode terminal cause out of range");
}

}  // namespace uwdt::data
