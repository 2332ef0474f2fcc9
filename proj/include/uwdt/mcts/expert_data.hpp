#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "uwdt/data/episode.hpp"
#include "uwdt/mcts/uct_planner.hpp"

namespace uwdt::mcts {

// Seed used by the planner at decision `step` of the episode seeded `episode_seed`.
std::uint64_t planner_seed(std::uint64_t episode_seed, int step);

// Plays one expert episode on build_scenario(seed, sample) and records
// (grid, action, scaled reward) per decision.
data::Episode generate_episode(std::uint64_t seed, const SearchConfig& cfg);

// Episode i uses scenario seed base_seed + i. Output order is independent of
// the worker count.
std::vector<data::Episode> generate_dataset(int n_episodes, const SearchConfig& cfg, std::uint64_t base_seed,
                                            int workers = 1,
                                            const std::function<void(int)>& on_episode_done = {});

// generate_dataset followed by write_dataset; I/O errors carry the path.
void generate_dataset_file(const std::filesystem::path& path, int n_episodes, const SearchConfig& cfg,
                           std::uint64_t base_seed, int workers = 1);

}  // namespace uwdt::mcts
