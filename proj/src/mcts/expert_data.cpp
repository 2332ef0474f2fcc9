#include "uwdt/mcts/expert_data.hpp"

#include <stdexcept>
#include <string>

#include "uwdt/common/parallel.hpp"
#include "uwdt/common/rng.hpp"
#include "uwdt/data/dataset_io.hpp"
#include "uwdt/obs/occupancy_grid.hpp"

namespace uwdt::mcts {

std::uint64_t planner_seed(std::uint64_t episode_seed, int step) {
  return Rng::mix(Rng::mix(episode_seed) + static_cast<std::uint64_t>(step) + 0x51ED270B2A3C4D5EULL);
}

data::Episode generate_episode(std::uint64_t seed, const SearchConfig& cfg) {
  sim::WorldState world = sim::build_scenario(seed, sim::kSampleInteracting);
  data::Episode ep;
  while (!world.terminal()) {
    const obs::OccupancyGrid grid = obs::render_grid(world);
    const Action a = plan(world, cfg, planner_seed(seed, world.decision_step));
    const sim::StepResult r = sim::step_decision(world, a);
    ep.push_step(grid, index_of(a), static_cast<float>(r.reward));
  }
  ep.cause = world.collided ? data::TerminalCause::collision
             : world.ego_exited ? data::TerminalCause::exit
                                : data::TerminalCause::horizon;
  return ep;
}

std::vector<data::Episode> generate_dataset(int n_episodes, const SearchConfig& cfg, std::uint64_t base_seed,
                                            int workers, const std::function<void(int)>& on_episode_done) {
  if (n_episodes < 1) throw std::invalid_argument("generate_dataset: n_episodes must be >= 1");
  cfg.validate();
  std::vector<data::Episode> episodes(static_cast<std::size_t>(n_episodes));
  parallel_for(episodes.size(), workers, [&](std::size_t i) {
    episodes[i] = generate_episode(base_seed + i, cfg);
    if (on_episode_done) on_episode_done(static_cast<int>(i));
  });
  return episodes;
}

void generate_dataset_file(const std::filesystem::path& path, int n_episodes, const SearchConfig& cfg,
                           std::uint64_t base_seed, int workers) {
  data::write_dataset(path, generate_dataset(n_episodes, cfg, base_seed, workers));
}

}  // namespace uwdt::mcts
