#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uwdt/common/rng.hpp"
#include "uwdt/data/episode.hpp"
#include "uwdt/obs/occupancy_grid.hpp"
#include "uwdt/sim/world.hpp"

namespace uwdt::eval {

using Probabilities = std::array<double, kNumActions>;

struct PolicyDecision {
  Action action = Action::cruise;
  std::optional<Probabilities> probs;
};

// Closed-loop driver. One instance plays one episode at a time; clone() gives
// an independent instance for another worker.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual bool wants_grid() const { return false; }
  virtual void begin_episode(std::uint64_t episode_seed) = 0;
  // grid is non-null iff wants_grid() is true.
  virtual PolicyDecision decide(const sim::WorldState& world, const obs::OccupancyGrid* grid) = 0;
  virtual void observe(Action /*taken*/, double /*scaled_reward*/) {}
  virtual std::unique_ptr<Policy> clone() const = 0;
};

class RandomPolicy final : public Policy {
 public:
  std::string name() const override { return "random"; }
  void begin_episode(std::uint64_t episode_seed) override;
  PolicyDecision decide(const sim::WorldState& world, const obs::OccupancyGrid* grid) override;
  std::unique_ptr<Policy> clone() const override { return std::make_unique<RandomPolicy>(*this); }

 private:
  Rng rng_;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(Action action) : action_(action) {}
  std::string name() const override;
  void begin_episode(std::uint64_t) override {}
  PolicyDecision decide(const sim::WorldState&, const obs::OccupancyGrid*) override { return {action_, std::nullopt}; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ConstantPolicy>(*this); }

 private:
  Action action_;
};

struct EpisodeTrace {
  std::uint64_t seed = 0;
  int interacting = 0;
  std::vector<Action> actions;
  std::vector<double> rewards;  // scaled
  std::vector<reward::Indicators> indicators;
  std::vector<double> speeds;          // every sub-step boundary, first entry before the first decision
  std::vector<sim::Vec2> positions;    // same sampling as speeds
  std::vector<Probabilities> probs;    // one per decision when the policy reports them
  bool collided = false;
  bool exited = false;
  int exit_step = -1;
  data::Episode episode;  // filled when grids are recorded

  int steps() const { return static_cast<int>(actions.size()); }
};

// Runs `policy` on `world` until it is terminal.
EpisodeTrace play_episode(Policy& policy, sim::WorldState world, std::uint64_t episode_seed, bool record_grids = false);

}  // namespace uwdt::eval
