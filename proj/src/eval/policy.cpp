#include "uwdt/eval/policy.hpp"

#include <algorithm>

namespace uwdt::eval {

namespace {
constexpr std::uint64_t kRandomPolicyStream = 4;
}

void RandomPolicy::begin_episode(std::uint64_t episode_seed) { rng_ = Rng::derive(episode_seed, kRandomPolicyStream); }

PolicyDecision RandomPolicy::decide(const sim::WorldState&, const obs::OccupancyGrid*) {
  Probabilities p;
  p.fill(1.0 / kNumActions);
  return {static_cast<Action>(rng_.uniform_int(0, kNumActions - 1)), p};
}

std::string ConstantPolicy::name() const { return "constant_" + std::string(name_of(action_)); }

EpisodeTrace play_episode(Policy& policy, sim::WorldState world, std::uint64_t episode_seed, bool record_grids) {
  EpisodeTrace tr;
  tr.seed = episode_seed;
  tr.interacting = static_cast<int>(std::count_if(world.vehicles.begin(), world.vehicles.end(),
                                                  [](const sim::Vehicle& v) { return v.role == sim::Role::interacting; }));
  tr.speeds.push_back(world.ego().speed);
  tr.positions.push_back(world.ego().position());
  policy.begin_episode(episode_seed);
  const bool need_grid = policy.wants_grid() || record_grids;
  while (!world.terminal()) {
    std::optional<obs::OccupancyGrid> grid;
    if (need_grid) grid = obs::render_grid(world);
    const PolicyDecision d = policy.decide(world, policy.wants_grid() ? &*grid : nullptr);
    const sim::StepResult r = sim::step_decision(world, d.action);
    policy.observe(d.action, r.reward);
    tr.actions.push_back(d.action);
    tr.rewards.push_back(r.reward);
    tr.indicators.push_back(r.indicators);
    tr.speeds.insert(tr.speeds.end(), r.ego_speeds.begin() + 1, r.ego_speeds.end());
    tr.positions.insert(tr.positions.end(), r.ego_positions.begin() + 1, r.ego_positions.end());
    if (d.probs) tr.probs.push_back(*d.probs);
    if (record_grids) tr.episode.push_step(*grid, index_of(d.action), static_cast<float>(r.reward));
  }
  tr.collided = world.collided;
  tr.exited = world.ego_exited;
  tr.exit_step = world.exit_step;
  tr.episode.cause = world.collided ? data::TerminalCause::collision
                     : world.ego_exited ? data::TerminalCause::exit
                                        : data::TerminalCause::horizon;
  return tr;
}

}  // namespace uwdt::eval
