#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "uwdt/sim/action.hpp"
#include "uwdt/sim/world.hpp"

namespace uwdt::mcts {

enum class RolloutPolicy : std::uint8_t { uniform_random, cruise_default };

struct SearchConfig {
  int simulations = 100;
  double exploration = 1.414;
  int rollout_depth = 10;  // decision steps
  RolloutPolicy rollout = RolloutPolicy::cruise_default;
  double discount = 0.99;

  void validate() const;
};

struct NodeStats {
  int visits = 0;
  std::array<int, kNumActions> action_visits{};
  std::array<double, kNumActions> value_sums{};

  double mean(int a) const { return action_visits[a] > 0 ? value_sums[a] / action_visits[a] : 0.0; }
};

struct SearchResult {
  Action action = Action::cruise;
  NodeStats root;
  // Root action chosen at each iteration, in order.
  std::vector<Action> root_trace;
};

// UCT search over the five high-level actions with a freshly built tree.
// Deterministic given (world, cfg, rng_seed). Throws InvalidState on a terminal world.
SearchResult search(const sim::WorldState& world, const SearchConfig& cfg, std::uint64_t rng_seed);

inline Action plan(const sim::WorldState& world, const SearchConfig& cfg, std::uint64_t rng_seed) {
  return search(world, cfg, rng_seed).action;
}

// Discounted return of a depth-limited rollout from `world` (which is consumed).
double rollout_value(sim::WorldState world, const SearchConfig& cfg, Rng& rng);

}  // namespace uwdt::mcts
