#include "uwdt/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "uwdt/common/parallel.hpp"
#include "uwdt/weighting/entropy_weights.hpp"

namespace uwdt::eval {

namespace {

constexpr std::uint64_t kDensityStream = 6;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string density_name(Density d) {
  switch (d) {
    case Density::low: return "low";
    case Density::medium: return "medium";
    case Density::high: return "high";
    case Density::mixed: return "mixed";
  }
  return "mixed";
}

Density density_from_name(const std::string& s) {
  if (s == "low") return Density::low;
  if (s == "medium") return Density::medium;
  if (s == "high") return Density::high;
  if (s == "mixed") return Density::mixed;
  throw std::invalid_argument("unknown density level: " + s);
}

int interacting_for(Density d, std::uint64_t scenario_seed) {
  switch (d) {
    case Density::low: {
      Rng rng = Rng::derive(scenario_seed, kDensityStream);
      return static_cast<int>(rng.uniform_int(0, 2));
    }
    case Density::medium: return 3;
    case Density::high: return 4;
    case Density::mixed: return sim::kSampleInteracting;
  }
  return sim::kSampleInteracting;
}

MetricsRecord compute_metrics(const EpisodeTrace& tr) {
  MetricsRecord m;
  m.seed = tr.seed;
  m.episode_length = tr.steps();
  for (double r : tr.rewards) m.accumulated_reward += r;
  m.step_rewards = tr.rewards;
  const auto& v = tr.speeds;
  if (v.size() > 1) {
    double sum = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      sum += v[i];
      m.travel_distance += 0.5 * (v[i - 1] + v[i]) * sim::kPhysicsDt;
      if (v[i] < kHaltSpeed) m.halt_duration += sim::kPhysicsDt;
    }
    m.average_speed = sum / static_cast<double>(v.size() - 1);
  }
  std::size_t at = 1;
  for (int t = 0; t < tr.steps(); ++t) {
    const int n = sim::substeps_for(t);
    double s = 0.0;
    int c = 0;
    for (int k = 0; k < n && at < v.size(); ++k, ++at, ++c) s += v[at];
    m.step_speeds.push_back(c > 0 ? s / c : 0.0);
  }
  m.collided = tr.collided;
  m.reached_exit = tr.exited;
  m.time_to_exit = tr.exited && tr.exit_step >= 0 ? tr.exit_step : sim::kMaxDecisionSteps;
  for (const auto& p : tr.probs) m.entropies.push_back(weighting::entropy(p));
  return m;
}

std::vector<MetricsRecord> run_eval(const Policy& policy, Density level, int n_episodes, std::uint64_t base_seed,
                                    int workers) {
  if (n_episodes < 1) throw std::invalid_argument("run_eval: n_episodes must be >= 1");
  std::vector<MetricsRecord> out(static_cast<std::size_t>(n_episodes));
  const int w = std::max(1, std::min(workers, n_episodes));
  std::vector<std::unique_ptr<Policy>> clones;
  for (int i = 0; i < w; ++i) clones.push_back(policy.clone());
  // Strided assignment keeps each clone on one thread.
  parallel_for(static_cast<std::size_t>(w), w, [&](std::size_t k) {
    for (std::size_t i = k; i < out.size(); i += static_cast<std::size_t>(w)) {
      const std::uint64_t seed = base_seed + i;
      sim::WorldState world = sim::build_scenario(seed, interacting_for(level, seed));
      out[i] = compute_metrics(play_episode(*clones[k], std::move(world), seed));
    }
  });
  return out;
}

Stat mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std: empty input");
  Stat s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  }
  return s;
}

Aggregate aggregate(const std::vector<MetricsRecord>& records, const std::string& policy, const std::string& density) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  Aggregate a;
  a.policy = policy;
  a.density = density;
  a.n_episodes = static_cast<int>(records.size());
  a.single_record = records.size() == 1;
  std::vector<double> reward, speed, len, dist, tte, halt;
  int exits = 0;
  int collisions = 0;
  for (const auto& r : records) {
    reward.push_back(r.accumulated_reward);
    speed.push_back(r.average_speed);
    len.push_back(r.episode_length);
    dist.push_back(r.travel_distance);
    tte.push_back(r.time_to_exit);
    halt.push_back(r.halt_duration);
    exits += r.reached_exit ? 1 : 0;
    collisions += r.collided ? 1 : 0;
  }
  a.reward = mean_std(reward);
  a.speed = mean_std(speed);
  a.episode_length = mean_std(len);
  a.distance = mean_std(dist);
  a.time_to_exit = mean_std(tte);
  a.halt = mean_std(halt);
  a.exit_rate_pct = 100.0 * exits / static_cast<double>(records.size());
  a.collision_rate_pct = 100.0 * collisions / static_cast<double>(records.size());
  return a;
}

EntropyStats entropy_stats(const std::vector<MetricsRecord>& records) {
  EntropyStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -s.min;
  std::vector<double> means;
  for (const auto& r : records) {
    if (r.entropies.empty()) continue;
    double sum = 0.0;
    for (double h : r.entropies) {
      s.min = std::min(s.min, h);
      s.max = std::max(s.max, h);
      sum += h;
    }
    means.push_back(sum / static_cast<double>(r.entropies.size()));
  }
  if (means.empty()) throw std::invalid_argument("entropy_stats: no entropy logs");
  s.average = mean_std(means);
  return s;
}

std::vector<ProfileRow> step_profiles(const std::vector<MetricsRecord>& records, const std::string& policy,
                                      const std::string& density) {
  std::vector<ProfileRow> rows;
  for (int t = 0; t < sim::kMaxDecisionSteps; ++t) {
    ProfileRow row{policy, density, t, 0, 0.0, 0.0};
    for (const auto& r : records) {
      if (t >= static_cast<int>(r.step_rewards.size())) continue;
      ++row.episodes;
      row.reward_mean += r.step_rewards[t];
      row.speed_mean += r.step_speeds[t];
    }
    if (row.episodes > 0) {
      row.reward_mean /= row.episodes;
      row.speed_mean /= row.episodes;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string summary_csv(const std::vector<Aggregate>& aggregates) {
  std::ostringstream os;
  os << kSummaryHeader << '\n';
  for (const auto& a : aggregates) {
    os << a.policy << ',' << a.density << ',' << a.n_episodes << ',' << fmt(a.reward.mean) << ',' << fmt(a.reward.std)
       << ',' << fmt(a.speed.mean) << ',' << fmt(a.speed.std) << ',' << fmt(a.episode_length.mean) << ','
       << fmt(a.episode_length.std) << ',' << fmt(a.distance.mean) << ',' << fmt(a.distance.std) << ','
       << fmt(a.exit_rate_pct) << ',' << fmt(a.collision_rate_pct) << ',' << fmt(a.time_to_exit.mean) << ','
       << fmt(a.time_to_exit.std) << ',' << fmt(a.halt.mean) << ',' << fmt(a.halt.std) << '\n';
  }
  return os.str();
}

std::string profiles_csv(const std::vector<ProfileRow>& rows) {
  std::ostringstream os;
  os << kProfileHeader << '\n';
  for (const auto& r : rows) {
    os << r.policy << ',' << r.density << ',' << r.step << ',' << r.episodes << ',' << fmt(r.reward_mean) << ','
       << fmt(r.speed_mean) << '\n';
  }
  return os.str();
}

std::string entropy_csv(const std::vector<EntropyRow>& rows) {
  std::ostringstream os;
  os << kEntropyHeader << '\n';
  for (const auto& r : rows) {
    os << r.policy << ',' << r.density << ',' << fmt(r.stats.min) << ',' << fmt(r.stats.max) << ','
       << fmt(r.stats.average.mean) << ',' << fmt(r.stats.average.std) << '\n';
  }
  return os.str();
}

void emit_results(const std::vector<Aggregate>& aggregates, const std::vector<ProfileRow>& profiles,
                  const std::filesystem::path& dir, const std::vector<EntropyRow>& entropy_rows) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "summary.csv", summary_csv(aggregates));
  write_text(dir / "profiles.csv", profiles_csv(profiles));
  if (!entropy_rows.empty()) write_text(dir / "entropy.csv", entropy_csv(entropy_rows));
}

}  // namespace uwdt::eval
