#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uwdt/common/rng.hpp"
#include "uwdt/data/episode.hpp"

namespace uwdt::data {

inline constexpr double kReturnDiscount = 0.99;
inline constexpr int kDefaultContext = 20;

// R_t = sum_{k >= t} gamma^(k - t) r_k, via the backward recurrence.
// Throws std::invalid_argument on empty input or gamma outside [0, 1).
std::vector<double> compute_rtg(std::span<const double> rewards, double gamma);
std::vector<double> compute_rtg(std::span<const float> rewards, double gamma);

// K-step training window ending at one timestep, left-padded. Position k holds
// the triple (R_t, s_t, a_{t-1}) for some episode step t; the target is a_t.
struct TokenWindow {
  int context = kDefaultContext;
  std::vector<std::uint8_t> mask;          // 1 = valid; padding is a prefix
  std::vector<float> returns_to_go;
  std::vector<const std::int8_t*> states;  // quantized grids, nullptr when masked
  std::vector<int> prev_actions;           // kPaddingActionId before the first step
  std::vector<int> timesteps;              // absolute decision step
  std::vector<int> targets;                // -1 when masked

  int valid_count() const;
  int first_valid() const { return context - valid_count(); }
};

// One window per timestep of the episode. The returned windows point into
// `episode.grids`, which must outlive them.
std::vector<TokenWindow> make_windows(const Episode& episode, int context = kDefaultContext,
                                      double gamma = kReturnDiscount);

// Throws std::invalid_argument unless the mask is a (possibly empty) padding
// prefix followed by at least one valid position with defined inputs.
void validate_window(const TokenWindow& w);

struct TokenRef {
  int window = 0;    // index within the batch
  int position = 0;  // index within the window
};

struct Batch {
  std::vector<const TokenWindow*> windows;
  std::vector<TokenRef> valid;  // B_val in window-major order

  int token_count() const { return static_cast<int>(valid.size()); }
};

Batch make_batch(std::vector<const TokenWindow*> windows);

// Uniform sampling with replacement over all windows.
Batch sample_batch(std::span<const TokenWindow> windows, int batch_size, Rng& rng);

}  // namespace uwdt::data
