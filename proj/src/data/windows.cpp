#include "uwdt/data/windows.hpp"

#include <stdexcept>

#include "uwdt/sim/action.hpp"

namespace uwdt::data {

namespace {

template <typename T>
std::vector<double> rtg_impl(std::span<const T> rewards, double gamma) {
  if (rewards.empty()) throw std::invalid_argument("compute_rtg: empty reward sequence");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("compute_rtg: gamma must be in [0, 1)");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = static_cast<double>(rewards[i]) + gamma * acc;
    out[i] = acc;
  }
  return out;
}

}  // namespace

std::vector<double> compute_rtg(std::span<const double> rewards, double gamma) { return rtg_impl(rewards, gamma); }
std::vector<double> compute_rtg(std::span<const float> rewards, double gamma) { return rtg_impl(rewards, gamma); }

int TokenWindow::valid_count() const {
  int n = 0;
  for (std::uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

std::vector<TokenWindow> make_windows(const Episode& episode, int context, double gamma) {
  if (context < 1) throw std::invalid_argument("make_windows: context must be >= 1");
  const int steps = episode.steps();
  if (steps == 0) return {};
  const std::vector<double> rtg = compute_rtg(std::span<const float>(episode.rewards), gamma);

  std::vector<TokenWindow> windows;
  windows.reserve(static_cast<std::size_t>(steps));
  for (int end = 0; end < steps; ++end) {
    TokenWindow w;
    w.context = context;
    const auto k = static_cast<std::size_t>(context);
    w.mask.assign(k, 0);
    w.returns_to_go.assign(k, 0.0f);
    w.states.assign(k, nullptr);
    w.prev_actions.assign(k, kPaddingActionId);
    w.timesteps.assign(k, 0);
    w.targets.assign(k, -1);
    for (int pos = 0; pos < context; ++pos) {
      const int t = end - (context - 1 - pos);
      if (t < 0) continue;
      const auto p = static_cast<std::size_t>(pos);
      w.mask[p] = 1;
      w.returns_to_go[p] = static_cast<float>(rtg[static_cast<std::size_t>(t)]);
      w.states[p] = episode.grid(t).data();
      w.prev_actions[p] = t == 0 ? kPaddingActionId : episode.actions[static_cast<std::size_t>(t - 1)];
      w.timesteps[p] = t;
      w.targets[p] = episode.actions[static_cast<std::size_t>(t)];
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

void validate_window(const TokenWindow& w) {
  const auto k = static_cast<std::size_t>(w.context);
  if (w.context < 1 || w.mask.size() != k || w.returns_to_go.size() != k || w.states.size() != k ||
      w.prev_actions.size() != k || w.timesteps.size() != k || w.targets.size() != k)
    throw std::invalid_argument("token window: field lengths disagree with context");
  bool seen_valid = false;
  for (std::size_t p = 0; p < k; ++p) {
    if (w.mask[p]) {
      seen_valid = true;
      if (!w.states[p]) throw std::invalid_argument("token window: valid position without a state");
      if (w.prev_actions[p] < 0 || w.prev_actions[p] > kPaddingActionId)
        throw std::invalid_argument("token window: previous action id out of range");
      if (w.timesteps[p] < 0 || w.timesteps[p] >= kMaxEpisodeSteps)
        throw std::invalid_argument("token window: timestep out of range");
    } else if (seen_valid) {
      throw std::invalid_argument("token window: mask must be a padding prefix followed by valid positions");
    }
  }
  if (!seen_valid) throw std::invalid_argument("token window: no valid positions");
}

Batch make_batch(std::vector<const TokenWindow*> windows) {
  Batch b;
  b.windows = std::move(windows);
  for (std::size_t i = 0; i < b.windows.size(); ++i) {
    const TokenWindow& w = *b.windows[i];
    for (int p = 0; p < w.context; ++p)
      if (w.mask[static_cast<std::size_t>(p)] && w.targets[static_cast<std::size_t>(p)] >= 0)
        b.valid.push_back({static_cast<int>(i), p});
  }
  return b;
}

Batch sample_batch(std::span<const TokenWindow> windows, int batch_size, Rng& rng) {
  if (windows.empty()) throw std::invalid_argument("sample_batch: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch size must be >= 1");
  std::vector<const TokenWindow*> picked;
  picked.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i)
    picked.push_back(&windows[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(windows.size()) - 1))]);
  return make_batch(std::move(picked));
}

}  // namespace uwdt::data
