#include "uwdt/mcts/uct_planner.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "uwdt/common/errors.hpp"

namespace uwdt::mcts {

namespace {

struct Node {
  sim::WorldState world;
  NodeStats stats;
  std::array<int, kNumActions> child{-1, -1, -1, -1, -1};
  std::array<double, kNumActions> edge_reward{};
};

int select_uct(const NodeStats& s, double c) {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  const double log_n = std::log(static_cast<double>(s.visits));
  for (int a = 0; a < kNumActions; ++a) {
    const double n = s.action_visits[a];
    const double score = s.value_sums[a] / n + c * std::sqrt(log_n / n);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

int first_untried(const NodeStats& s) {
  for (int a = 0; a < kNumActions; ++a)
    if (s.action_visits[a] == 0) return a;
  return -1;
}

}  // namespace

void SearchConfig::validate() const {
  if (simulations < 1) throw std::invalid_argument("SearchConfig: simulations must be >= 1");
  if (exploration < 0.0) throw std::invalid_argument("SearchConfig: exploration constant must be >= 0");
  if (rollout_depth < 1) throw std::invalid_argument("SearchConfig: rollout depth must be >= 1");
  if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("SearchConfig: discount must be in [0, 1]");
}

double rollout_value(sim::WorldState world, const SearchConfig& cfg, Rng& rng) {
  double value = 0.0;
  double scale = 1.0;
  for (int d = 0; d < cfg.rollout_depth && !world.terminal(); ++d) {
    const Action a = cfg.rollout == RolloutPolicy::cruise_default
                         ? Action::cruise
                         : static_cast<Action>(rng.uniform_int(0, kNumActions - 1));
    value += scale * sim::step_decision(world, a).reward;
    scale *= cfg.discount;
  }
  return value;
}

SearchResult search(const sim::WorldState& root_world, const SearchConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate();
  if (root_world.terminal()) throw InvalidState("plan: world is terminal");

  Rng rng(rng_seed);
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(cfg.simulations) + 1);
  nodes.push_back(Node{root_world, {}, {-1, -1, -1, -1, -1}, {}});

  SearchResult result;
  result.root_trace.reserve(static_cast<std::size_t>(cfg.simulations));
  std::vector<std::pair<int, int>> path;
  for (int it = 0; it < cfg.simulations; ++it) {
    path.clear();
    int idx = 0;
    double leaf_value = 0.0;
    while (true) {
      if (nodes[idx].world.terminal()) break;
      const int untried = first_untried(nodes[idx].stats);
      if (untried >= 0) {
        Node child{nodes[idx].world, {}, {-1, -1, -1, -1, -1}, {}};
        const double r = sim::step_decision(child.world, static_cast<Action>(untried)).reward;
        nodes[idx].edge_reward[untried] = r;
        path.emplace_back(idx, untried);
        leaf_value = child.world.terminal() ? 0.0 : rollout_value(child.world, cfg, rng);
        nodes.push_back(std::move(child));
        nodes[idx].child[untried] = static_cast<int>(nodes.size() - 1);
        break;
      }
      const int a = select_uct(nodes[idx].stats, cfg.exploration);
      path.emplace_back(idx, a);
      idx = nodes[idx].child[a];
    }
    if (!path.empty()) result.root_trace.push_back(static_cast<Action>(path.front().second));

    double g = leaf_value;
    for (auto it_path = path.rbegin(); it_path != path.rend(); ++it_path) {
      auto [node_idx, a] = *it_path;
      NodeStats& s = nodes[node_idx].stats;
      g = nodes[node_idx].edge_reward[a] + cfg.discount * g;
      s.action_visits[a] += 1;
      s.value_sums[a] += g;
      s.visits += 1;
#ifndef NDEBUG
      int total = 0;
      for (int n : s.action_visits) total += n;
      assert(total == s.visits);
#endif
    }
  }

  result.root = nodes.front().stats;
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    const NodeStats& s = result.root;
    if (s.action_visits[a] > s.action_visits[best] ||
        (s.action_visits[a] == s.action_visits[best] && s.mean(a) > s.mean(best)))
      best = a;
  }
  result.action = static_cast<Action>(best);
  return result;
}

}  // namespace uwdt::mcts
