#pragma once

#include <cstdint>
#include <vector>

#include "uwdt/common/rng.hpp"
#include "uwdt/data/episode.hpp"
#include "uwdt/nn/seq_model.hpp"
#include "uwdt/sim/world.hpp"

namespace uwdt::testing {

// A scenario with every background vehicle removed.
inline sim::WorldState empty_world(std::uint64_t seed = 7) {
  auto w = sim::build_scenario(seed, 0);
  w.vehicles.resize(1);
  return w;
}

// A vehicle on the ego's route, `gap` metres bumper-to-bumper ahead, that
// effectively cannot accelerate.
inline sim::Vehicle parked_ahead(const sim::WorldState& w, double gap) {
  sim::Vehicle v = w.ego();
  v.id = 99;
  v.role = sim::Role::circulating;
  v.offset = w.ego().offset + v.length + gap;
  v.speed = 0.0;
  v.lateral = 0.0;
  v.rel_heading = 0.0;
  v.idm.max_accel = 1e-9;
  return v;
}

// Skips ahead so that only `remaining` decisions are left in the episode.
inline void fast_forward(sim::WorldState& w, int remaining) {
  w.decision_step = sim::kMaxDecisionSteps - remaining;
  w.substep = 0;
  for (int k = 0; k < w.decision_step; ++k) w.substep += sim::substeps_for(k);
}

// The small configuration used for finite-difference checks.
inline nn::ModelConfig tiny_config(nn::ModelMode mode = nn::ModelMode::return_conditioned) {
  nn::ModelConfig c;
  c.encoder.in_channels = 2;
  c.encoder.height = 9;
  c.encoder.width = 10;
  c.encoder.channels = {3, 4, 5};
  c.encoder.embed = 6;
  c.context = 3;
  c.d_model = 8;
  c.layers = 1;
  c.heads = 1;
  c.max_timestep = 22;
  c.mode = mode;
  return c;
}

// Owns the grids a TokenInput points at.
struct RandomTokens {
  std::vector<std::vector<std::int8_t>> storage;
  nn::TokenInput input;
};

inline RandomTokens random_tokens(const nn::ModelConfig& cfg, int sequences, Rng& rng, int fixed_length = 0) {
  RandomTokens r;
  const int gv = cfg.encoder.grid_values();
  for (int s = 0; s < sequences; ++s) {
    const int len = fixed_length > 0 ? fixed_length : static_cast<int>(rng.uniform_int(1, cfg.context));
    r.input.lengths.push_back(len);
    const int t0 = static_cast<int>(rng.uniform_int(0, cfg.max_timestep - len));
    for (int k = 0; k < len; ++k) {
      std::vector<std::int8_t> g(static_cast<std::size_t>(gv));
      for (auto& v : g) v = static_cast<std::int8_t>(rng.uniform_int(-127, 127));
      r.storage.push_back(std::move(g));
      r.input.returns_to_go.push_back(static_cast<float>(rng.uniform(0.0, 22.0)));
      r.input.prev_actions.push_back(k == 0 && t0 == 0 ? kPaddingActionId
                                                       : static_cast<int>(rng.uniform_int(0, kNumActions - 1)));
      r.input.timesteps.push_back(t0 + k);
      r.input.targets.push_back(static_cast<int>(rng.uniform_int(0, kNumActions - 1)));
    }
  }
  for (const auto& g : r.storage) r.input.grids.push_back(g.data());
  return r;
}

// Episode with random grids, rewards in [0, 1] and the given actions.
inline data::Episode random_episode(int steps, Rng& rng, std::vector<int> actions = {}) {
  data::Episode e;
  e.grids.resize(static_cast<std::size_t>(steps) * data::kGridValues);
  for (auto& v : e.grids) v = static_cast<std::int8_t>(rng.uniform_int(-127, 127));
  for (int t = 0; t < steps; ++t) {
    const int a = actions.empty() ? static_cast<int>(rng.uniform_int(0, kNumActions - 1))
                                  : actions[static_cast<std::size_t>(t)];
    e.actions.push_back(static_cast<std::uint8_t>(a));
    e.rewards.push_back(static_cast<float>(rng.uniform()));
  }
  e.cause = steps == data::kMaxEpisodeSteps ? data::TerminalCause::horizon : data::TerminalCause::collision;
  return e;
}

}  // namespace uwdt::testing
