#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uwdt/eval/policy.hpp"

namespace uwdt::eval {

enum class Density : std::uint8_t { low, medium, high, mixed };

std::string density_name(Density d);
Density density_from_name(const std::string& s);

// Interacting-vehicle count for a scenario seed: low draws from {0, 1, 2},
// medium is 3, high is 4, mixed defers to build_scenario's own draw.
int interacting_for(Density d, std::uint64_t scenario_seed);

struct MetricsRecord {
  std::uint64_t seed = 0;
  double accumulated_reward = 0.0;  // sum of scaled rewards
  double average_speed = 0.0;       // over physics sub-steps
  int episode_length = 0;           // decision steps
  double travel_distance = 0.0;     // trapezoidal integral of speed
  bool reached_exit = false;
  bool collided = false;
  int time_to_exit = sim::kMaxDecisionSteps;  // decision steps
  double halt_duration = 0.0;                 // seconds below 1 m/s
  std::vector<double> entropies;              // per decision, when available
  std::vector<double> step_rewards;
  std::vector<double> step_speeds;  // mean over each decision's sub-steps
};

inline constexpr double kHaltSpeed = 1.0;

MetricsRecord compute_metrics(const EpisodeTrace& trace);

// Episode i plays scenario seed base_seed + i, so every policy sees the same
// scenarios at a given level. Output order is independent of `workers`.
std::vector<MetricsRecord> run_eval(const Policy& policy, Density level, int n_episodes, std::uint64_t base_seed,
                                    int workers = 1);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // unbiased; 0 for a single record
};

Stat mean_std(const std::vector<double>& xs);

struct Aggregate {
  std::string policy;
  std::string density;
  int n_episodes = 0;
  bool single_record = false;  // std undefined, reported as 0
  Stat reward, speed, episode_length, distance, time_to_exit, halt;
  double exit_rate_pct = 0.0;
  double collision_rate_pct = 0.0;
};

// Throws std::invalid_argument on empty input.
Aggregate aggregate(const std::vector<MetricsRecord>& records, const std::string& policy = "",
                    const std::string& density = "");

struct EntropyStats {
  double min = 0.0;
  double max = 0.0;
  Stat average;  // over per-episode mean entropies
};

// Throws std::invalid_argument when no record carries entropies.
EntropyStats entropy_stats(const std::vector<MetricsRecord>& records);

struct ProfileRow {
  std::string policy;
  std::string density;
  int step = 0;
  int episodes = 0;  // episodes still running at this step
  double reward_mean = 0.0;
  double speed_mean = 0.0;
};

// One row per decision step 0..21.
std::vector<ProfileRow> step_profiles(const std::vector<MetricsRecord>& records, const std::string& policy,
                                      const std::string& density);

inline constexpr const char* kSummaryHeader =
    "policy,density,n_episodes,reward_mean,reward_std,speed_mean,speed_std,eplen_mean,eplen_std,dist_mean,dist_std,"
    "exit_rate_pct,collision_rate_pct,tte_mean,tte_std,halt_mean,halt_std";
inline constexpr const char* kProfileHeader = "policy,density,step,episodes,reward_mean,speed_mean";
inline constexpr const char* kEntropyHeader = "policy,density,entropy_min,entropy_max,entropy_mean,entropy_std";

std::string summary_csv(const std::vector<Aggregate>& aggregates);
std::string profiles_csv(const std::vector<ProfileRow>& rows);

struct EntropyRow {
  std::string policy;
  std::string density;
  EntropyStats stats;
};
std::string entropy_csv(const std::vector<EntropyRow>& rows);

// Writes summary.csv and profiles.csv (and entropy.csv when rows are given)
// into `dir`. Throws std::runtime_error on I/O failure.
void emit_results(const std::vector<Aggregate>& aggregates, const std::vector<ProfileRow>& profiles,
                  const std::filesystem::path& dir, const std::vector<EntropyRow>& entropy_rows = {});

}  // namespace uwdt::eval
