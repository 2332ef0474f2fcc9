#pragma once

#include <memory>
#include <string>

#include "uwdt/eval/policy.hpp"
#include "uwdt/mcts/expert_data.hpp"

namespace uwdt::mcts {

// The expert as a closed-loop policy; same per-step planner seeds as generate_episode.
class MctsPolicy final : public eval::Policy {
 public:
  explicit MctsPolicy(SearchConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }
  std::string name() const override { return "mcts"; }
  void begin_episode(std::uint64_t episode_seed) override { seed_ = episode_seed; }
  eval::PolicyDecision decide(const sim::WorldState& world, const obs::OccupancyGrid*) override {
    return {plan(world, cfg_, planner_seed(seed_, world.decision_step)), std::nullopt};
  }
  std::unique_ptr<eval::Policy> clone() const override { return std::make_unique<MctsPolicy>(*this); }

 private:
  SearchConfig cfg_;
  std::uint64_t seed_ = 0;
};

}  // namespace uwdt::mcts
