#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "support.hpp"
#include "uwdt/eval/metrics.hpp"
#include "uwdt/nn/rollout.hpp"
#include "uwdt/nn/train.hpp"

using namespace uwdt;
using namespace uwdt::eval;
using uwdt::testing::empty_world;
using uwdt::testing::parked_ahead;

namespace {

const double kLn5 = std::log(5.0);

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string line; std::getline(ss, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

int columns(const std::string& line) { return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1; }

MetricsRecord record_with(double reward, bool collided = false) {
  MetricsRecord r;
  r.accumulated_reward = reward;
  r.collided = collided;
  r.episode_length = 22;
  return r;
}

std::shared_ptr<nn::SeqModel<float>> head_only_model(float cruise_bias) {
  auto m = std::make_shared<nn::SeqModel<float>>(nn::make_initialized_model(nn::ModelConfig{}, 8));
  for (auto* p : m->parameters()) {
    if (p->name == "head.weight") p->value.setZero();
    if (p->name == "head.bias") {
      p->value.setZero();
      p->value(0, index_of(Action::cruise)) = cruise_bias;
    }
  }
  return m;
}

void check_record_invariants(const MetricsRecord& m) {
  CHECK(m.episode_length >= 1);
  CHECK(m.episode_length <= sim::kMaxDecisionSteps);
  CHECK(m.step_rewards.size() == static_cast<std::size_t>(m.episode_length));
  CHECK(m.step_speeds.size() == static_cast<std::size_t>(m.episode_length));
  CHECK(std::abs(m.accumulated_reward - std::accumulate(m.step_rewards.begin(), m.step_rewards.end(), 0.0)) < 1e-12);
  CHECK(m.accumulated_reward >= 0.0);
  CHECK(m.accumulated_reward <= static_cast<double>(m.episode_length) + 1e-12);
  for (double r : m.step_rewards) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
  CHECK(m.average_speed >= 0.0);
  CHECK(m.travel_distance >= 0.0);
  CHECK(m.halt_duration >= 0.0);
  CHECK(m.halt_duration <= 11.0 + 1e-9);
  CHECK(m.time_to_exit >= 1);
  CHECK(m.time_to_exit <= sim::kMaxDecisionSteps);
  if (!m.reached_exit) CHECK(m.time_to_exit == sim::kMaxDecisionSteps);
  if (m.reached_exit) CHECK(m.time_to_exit <= m.episode_length);
  if (m.collided) {
    CHECK(m.time_to_exit == sim::kMaxDecisionSteps);
    CHECK_FALSE(m.reached_exit);
  }
  if (!m.collided) CHECK(m.episode_length == sim::kMaxDecisionSteps);
}

}  // namespace

TEST_SUITE("density") {
  TEST_CASE("names round trip") {
    for (Density d : {Density::low, Density::medium, Density::high, Density::mixed})
      CHECK(density_from_name(density_name(d)) == d);
    CHECK_THROWS_AS(density_from_name("dense"), std::invalid_argument);
  }

  TEST_CASE("interacting counts per level") {
    std::set<int> low;
    for (std::uint64_t s = 0; s < 200; ++s) {
      const int n = interacting_for(Density::low, s);
      CHECK(n >= 0);
      CHECK(n <= 2);
      low.insert(n);
      CHECK(interacting_for(Density::low, s) == n);
      CHECK(interacting_for(Density::medium, s) == 3);
      CHECK(interacting_for(Density::high, s) == 4);
    }
    CHECK(low.size() == 3);
  }
}

TEST_SUITE("episode metrics") {
  TEST_CASE("random policy at high density satisfies every record invariant") {
    const auto records = run_eval(RandomPolicy(), Density::high, 20, 500);
    REQUIRE(records.size() == 20);
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(records[i].seed == 500 + i);
      check_record_invariants(records[i]);
      // The random policy reports its uniform distribution.
      REQUIRE(records[i].entropies.size() == static_cast<std::size_t>(records[i].episode_length));
      for (double h : records[i].entropies) CHECK(h == doctest::Approx(kLn5).epsilon(1e-12));
    }
  }

  TEST_CASE("accumulated reward equals the simulator's step rewards") {
    RandomPolicy p;
    const auto tr = play_episode(p, sim::build_scenario(12, 3), 12);
    const auto m = compute_metrics(tr);
    CHECK(m.accumulated_reward == std::accumulate(tr.rewards.begin(), tr.rewards.end(), 0.0));
    CHECK(m.episode_length == tr.steps());
  }

  TEST_CASE("travel distance matches the driven path on an empty road") {
    ConstantPolicy cruise(Action::cruise);
    const auto tr = play_episode(cruise, empty_world(), 1);
    const auto m = compute_metrics(tr);
    double arc = 0.0;
    for (std::size_t i = 1; i < tr.positions.size(); ++i) arc += (tr.positions[i] - tr.positions[i - 1]).norm();
    INFO("integrated " << m.travel_distance << " arc " << arc);
    CHECK(std::abs(m.travel_distance - arc) <= 0.01 * arc);
    CHECK_FALSE(m.collided);
    CHECK(m.episode_length == 22);
    CHECK(m.halt_duration == 0.0);
    // Cruising holds the spawn speed.
    CHECK(m.average_speed == doctest::Approx(8.0).epsilon(1e-6));
    CHECK(tr.speeds.size() == 166);
  }

  TEST_CASE("a collision records the full horizon as time to exit") {
    auto w = empty_world();
    w.vehicles.push_back(parked_ahead(w, 1.0));
    ConstantPolicy cruise(Action::cruise);
    const auto m = compute_metrics(play_episode(cruise, w, 2));
    CHECK(m.collided);
    CHECK(m.time_to_exit == 22);
    CHECK(m.episode_length == 1);
    check_record_invariants(m);
  }

  TEST_CASE("results do not depend on the worker count") {
    const auto a = run_eval(RandomPolicy(), Density::mixed, 8, 40, 1);
    const auto b = run_eval(RandomPolicy(), Density::mixed, 8, 40, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].seed == b[i].seed);
      CHECK(a[i].step_rewards == b[i].step_rewards);
      CHECK(a[i].travel_distance == b[i].travel_distance);
    }
  }

  TEST_CASE("policies are compared on the same scenarios") {
    const auto a = run_eval(RandomPolicy(), Density::medium, 6, 900);
    const auto b = run_eval(ConstantPolicy(Action::cruise), Density::medium, 6, 900);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].seed == b[i].seed);
  }
}

TEST_SUITE("aggregation") {
  TEST_CASE("mean and sample deviation") {
    const auto agg = aggregate({record_with(10.0), record_with(20.0)});
    CHECK(agg.reward.mean == 15.0);
    CHECK(agg.reward.std == doctest::Approx(7.0710678).epsilon(1e-6));
    CHECK(agg.n_episodes == 2);
    CHECK_FALSE(agg.single_record);
  }

  TEST_CASE("identical records have zero deviation") {
    const auto agg = aggregate(std::vector<MetricsRecord>(5, record_with(3.5)));
    CHECK(agg.reward.mean == 3.5);
    CHECK(agg.reward.std == 0.0);
  }

  TEST_CASE("collision and exit rates") {
    std::vector<MetricsRecord> rs(20, record_with(1.0));
    rs[3].collided = true;
    rs[5].reached_exit = true;
    rs[6].reached_exit = true;
    const auto agg = aggregate(rs);
    CHECK(agg.collision_rate_pct == doctest::Approx(5.0));
    CHECK(agg.exit_rate_pct == doctest::Approx(10.0));
  }

  TEST_CASE("single record and empty input") {
    const auto agg = aggregate({record_with(4.0)});
    CHECK(agg.single_record);
    CHECK(agg.reward.std == 0.0);
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  }

  TEST_CASE("entropy statistics") {
    MetricsRecord a = record_with(1.0), b = record_with(1.0);
    a.entropies = {0.5, 0.5, 0.5};
    b.entropies = {1.0, 1.0};
    const auto s = entropy_stats({a, b});
    CHECK(s.min == 0.5);
    CHECK(s.max == 1.0);
    CHECK(s.average.mean == doctest::Approx(0.75));
    CHECK(s.average.std == doctest::Approx(0.35355339).epsilon(1e-6));
    CHECK_THROWS_AS(entropy_stats({record_with(1.0)}), std::invalid_argument);
  }

  TEST_CASE("uniform and one-hot model policies") {
    const nn::ModelPolicy uniform(head_only_model(0.0f));
    const auto su = entropy_stats(run_eval(uniform, Density::low, 3, 70));
    CHECK(su.min == doctest::Approx(kLn5).epsilon(1e-9));
    CHECK(su.max == doctest::Approx(kLn5).epsilon(1e-9));
    CHECK(su.average.mean == doctest::Approx(kLn5).epsilon(1e-9));
    CHECK(su.average.std < 1e-9);

    const nn::ModelPolicy peaked(head_only_model(60.0f));
    const auto rs = run_eval(peaked, Density::low, 3, 70);
    const auto sp = entropy_stats(rs);
    CHECK(sp.min < 1e-12);
    CHECK(sp.max < 1e-12);
    CHECK(sp.average.mean < 1e-12);
    for (const auto& r : rs) {
      check_record_invariants(r);
      for (double h : r.entropies) {
        CHECK(h >= 0.0);
        CHECK(h <= kLn5 + 1e-12);
      }
    }
  }
}

TEST_SUITE("result files") {
  TEST_CASE("summary and profile layout") {
    const auto rs = run_eval(RandomPolicy(), Density::high, 5, 11);
    const auto agg = aggregate(rs, "random", "high");
    const auto lines = split_lines(summary_csv({agg}));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == kSummaryHeader);
    CHECK(columns(lines[0]) == 17);
    CHECK(columns(lines[1]) == 17);
    CHECK(lines[1].rfind("random,high,5,", 0) == 0);

    const auto prof = step_profiles(rs, "random", "high");
    CHECK(prof.size() == 22);
    for (int t = 0; t < 22; ++t) {
      CHECK(prof[static_cast<std::size_t>(t)].step == t);
      CHECK(prof[static_cast<std::size_t>(t)].episodes <= 5);
    }
    CHECK(prof[0].episodes == 5);
    const auto plines = split_lines(profiles_csv(prof));
    CHECK(plines.size() == 23);
    CHECK(plines[0] == kProfileHeader);
  }

  TEST_CASE("emitting twice gives byte-identical files") {
    const auto dir = std::filesystem::temp_directory_path() / "uwdt_test_eval";
    std::filesystem::remove_all(dir);
    auto emit = [&](const std::filesystem::path& out) {
      const auto rs = run_eval(RandomPolicy(), Density::low, 4, 3);
      const auto agg = aggregate(rs, "random", "low");
      MetricsRecord e = record_with(1.0);
      e.entropies = {0.2, 0.4};
      emit_results({agg}, step_profiles(rs, "random", "low"), out, {{"random", "low", entropy_stats({e})}});
    };
    emit(dir / "a");
    emit(dir / "b");
    for (const char* f : {"summary.csv", "profiles.csv", "entropy.csv"}) {
      INFO(f);
      const auto a = slurp(dir / "a" / f);
      CHECK_FALSE(a.empty());
      CHECK(a == slurp(dir / "b" / f));
    }
    CHECK(split_lines(slurp(dir / "a" / "entropy.csv"))[0] == kEntropyHeader);
  }
}
