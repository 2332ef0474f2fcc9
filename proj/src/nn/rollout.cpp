#include "uwdt/nn/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uwdt::nn {

namespace {
constexpr std::uint64_t kSampleStream = 5;
}

ModelPolicy::ModelPolicy(std::shared_ptr<const SeqModel<float>> model, RolloutMode mode, double target_return,
                         std::string name)
    : model_(std::move(model)), mode_(mode), target_return_(target_return), name_(std::move(name)) {
  if (!model_) throw std::invalid_argument("ModelPolicy: null model");
  if (model_->config().encoder.grid_values() != obs::OccupancyGrid::kSize)
    throw std::invalid_argument("ModelPolicy: encoder input does not match the occupancy grid");
}

void ModelPolicy::begin_episode(std::uint64_t episode_seed) {
  sample_rng_ = Rng::derive(episode_seed, kSampleStream);
  history_.clear();
  return_to_go_ = target_return_;
  last_action_ = kPaddingActionId;
  log_.clear();
}

ModelPolicy::Entry ModelPolicy::make_entry(const obs::OccupancyGrid& grid, int timestep) const {
  Entry e;
  e.grid.resize(obs::OccupancyGrid::kSize);
  data::quantize_grid(grid, e.grid);
  e.encoded = model_->encode({e.grid.data()}, false, nullptr, nullptr);
  e.return_to_go = static_cast<float>(return_to_go_);
  e.prev_action = last_action_;
  e.timestep = std::min(timestep, model_->config().max_timestep - 1);
  return e;
}

ActionDistribution ModelPolicy::evaluate(const std::deque<Entry>& history) const {
  TokenInput in;
  const int n = static_cast<int>(history.size());
  in.lengths = {n};
  Mat<float> enc(n, model_->config().encoder.embed);
  for (int i = 0; i < n; ++i) {
    const Entry& e = history[i];
    enc.row(i) = e.encoded.row(0);
    in.grids.push_back(e.grid.data());
    in.returns_to_go.push_back(e.return_to_go);
    in.prev_actions.push_back(e.prev_action);
    in.timesteps.push_back(e.timestep);
  }
  const Mat<float> logits = model_->forward_encoded(enc, in, nullptr);
  return distribution_row(logits, n - 1);
}

ActionDistribution ModelPolicy::distribution_for(const obs::OccupancyGrid& grid, int timestep) const {
  std::deque<Entry> h = history_;
  h.push_back(make_entry(grid, timestep));
  while (static_cast<int>(h.size()) > model_->config().context) h.pop_front();
  return evaluate(h);
}

eval::PolicyDecision ModelPolicy::decide(const sim::WorldState& world, const obs::OccupancyGrid* grid) {
  if (grid == nullptr) throw std::invalid_argument("ModelPolicy needs the occupancy grid");
  history_.push_back(make_entry(*grid, world.decision_step));
  while (static_cast<int>(history_.size()) > model_->config().context) history_.pop_front();
  const ActionDistribution d = evaluate(history_);
  for (double p : d.probs) {
    if (!std::isfinite(p)) throw std::runtime_error("model produced a non-finite action distribution");
  }
  log_.push_back(d);
  int choice = 0;
  if (mode_ == RolloutMode::greedy) {
    for (int a = 1; a < kNumActions; ++a) {
      if (d.probs[a] > d.probs[choice]) choice = a;
    }
  } else {
    const double u = sample_rng_.uniform();
    double acc = 0.0;
    choice = kNumActions - 1;
    for (int a = 0; a < kNumActions; ++a) {
      acc += d.probs[a];
      if (u < acc) {
        choice = a;
        break;
      }
    }
  }
  return {static_cast<Action>(choice), d.probs};
}

void ModelPolicy::observe(Action taken, double scaled_reward) {
  return_to_go_ = std::max(0.0, return_to_go_ - scaled_reward);
  last_action_ = index_of(taken);
}

RolloutResult rollout(const SeqModel<float>& model, std::uint64_t env_seed, int n_interacting, RolloutMode mode,
                      double target_return) {
  auto shared = std::shared_ptr<const SeqModel<float>>(&model, [](const SeqModel<float>*) {});
  ModelPolicy policy(shared, mode, target_return);
  RolloutResult r;
  r.trace = eval::play_episode(policy, sim::build_scenario(env_seed, n_interacting), env_seed, true);
  r.distributions = policy.distribution_log();
  return r;
}

}  // namespace uwdt::nn
