#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "uwdt/eval/policy.hpp"
#include "uwdt/nn/seq_model.hpp"

namespace uwdt::nn {

enum class RolloutMode : std::uint8_t { greedy, stochastic };

inline constexpr double kDefaultTargetReturn = 22.0;

// Closed-loop sequence-model driver over a sliding window of the last
// `context` decisions. The return token starts at target_return and drops by
// each received scaled reward, floored at 0. Greedy ties go to the lowest index.
class ModelPolicy final : public eval::Policy {
 public:
  ModelPolicy(std::shared_ptr<const SeqModel<float>> model, RolloutMode mode = RolloutMode::greedy,
              double target_return = kDefaultTargetReturn, std::string name = "model");

  std::string name() const override { return name_; }
  bool wants_grid() const override { return true; }
  void begin_episode(std::uint64_t episode_seed) override;
  eval::PolicyDecision decide(const sim::WorldState& world, const obs::OccupancyGrid* grid) override;
  void observe(Action taken, double scaled_reward) override;
  std::unique_ptr<eval::Policy> clone() const override { return std::make_unique<ModelPolicy>(*this); }

  // Distribution for the current history without committing a decision.
  ActionDistribution distribution_for(const obs::OccupancyGrid& grid, int timestep) const;

  // Every distribution produced in the current episode, in decision order.
  const std::vector<ActionDistribution>& distribution_log() const { return log_; }

 private:
  struct Entry {
    std::vector<std::int8_t> grid;
    Mat<float> encoded;
    float return_to_go = 0.0f;
    int prev_action = kPaddingActionId;
    int timestep = 0;
  };
  Entry make_entry(const obs::OccupancyGrid& grid, int timestep) const;
  ActionDistribution evaluate(const std::deque<Entry>& history) const;

  std::shared_ptr<const SeqModel<float>> model_;
  RolloutMode mode_;
  double target_return_;
  std::string name_;
  Rng sample_rng_;
  std::deque<Entry> history_;
  double return_to_go_ = 0.0;
  int last_action_ = kPaddingActionId;
  std::vector<ActionDistribution> log_;
};

struct RolloutResult {
  eval::EpisodeTrace trace;  // trace.episode holds the recorded grids
  std::vector<ActionDistribution> distributions;
};

// One episode on build_scenario(env_seed, n_interacting).
RolloutResult rollout(const SeqModel<float>& model, std::uint64_t env_seed, int n_interacting = sim::kSampleInteracting,
                      RolloutMode mode = RolloutMode::greedy, double target_return = kDefaultTargetReturn);

}  // namespace uwdt::nn
