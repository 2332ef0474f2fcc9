#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "support.hpp"
#include "uwdt/nn/checkpoint.hpp"
#include "uwdt/nn/rollout.hpp"
#include "uwdt/nn/train.hpp"
#include "uwdt/obs/occupancy_grid.hpp"

using namespace uwdt;
using namespace uwdt::nn;
using uwdt::testing::random_episode;

namespace {

std::vector<data::Episode> one_episode_dataset(std::uint64_t seed, int steps = 12) {
  Rng rng(seed);
  // A fixed action pattern gives the model something learnable.
  std::vector<int> actions;
  for (int t = 0; t < steps; ++t) actions.push_back(t % 3 == 0 ? 2 : 4);
  return {random_episode(steps, rng, actions)};
}

Param<float>* find_param(SeqModel<float>& m, const std::string& name) {
  for (auto* p : m.parameters())
    if (p->name == name) return p;
  return nullptr;
}

bool same_tensors(const SeqModel<float>& a, const SeqModel<float>& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i]->name != pb[i]->name || pa[i]->value != pb[i]->value) return false;
  const auto ba = a.buffers();
  const auto bb = b.buffers();
  if (ba.size() != bb.size()) return false;
  for (std::size_t i = 0; i < ba.size(); ++i)
    if (ba[i]->value != bb[i]->value) return false;
  return true;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "uwdt_test_train";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Every logit row is the head bias: zero head weight.
std::shared_ptr<SeqModel<float>> constant_logit_model(const std::array<float, kNumActions>& bias) {
  auto m = std::make_shared<SeqModel<float>>(make_initialized_model(ModelConfig{}, 3));
  find_param(*m, "head.weight")->value.setZero();
  auto* b = find_param(*m, "head.bias");
  for (int a = 0; a < kNumActions; ++a) b->value(0, a) = bias[static_cast<std::size_t>(a)];
  return m;
}

}  // namespace

TEST_SUITE("schedule and clipping") {
  TEST_CASE("linear warm-up then constant") {
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.warmup_ratio = 0.1;
    // 100 steps: 10 warm-up steps reaching lr at step 9.
    CHECK(scheduled_lr(cfg, 0, 100) == doctest::Approx(1e-4));
    CHECK(scheduled_lr(cfg, 4, 100) == doctest::Approx(5e-4));
    CHECK(scheduled_lr(cfg, 9, 100) == doctest::Approx(1e-3));
    CHECK(scheduled_lr(cfg, 10, 100) == 1e-3);
    CHECK(scheduled_lr(cfg, 99, 100) == 1e-3);
    for (long long s = 1; s < 100; ++s) CHECK(scheduled_lr(cfg, s, 100) >= scheduled_lr(cfg, s - 1, 100));
    cfg.warmup_ratio = 0.0;
    CHECK(scheduled_lr(cfg, 0, 100) == 1e-3);
  }

  TEST_CASE("gradient clipping caps the global norm") {
    auto m = make_initialized_model(testing::tiny_config(), 1);
    auto params = m.parameters();
    Rng rng(2);
    for (auto* p : params)
      for (Eigen::Index i = 0; i < p->grad.size(); ++i) p->grad.data()[i] = static_cast<float>(rng.normal());
    double before = 0.0;
    for (auto* p : params) before += p->grad.cast<double>().squaredNorm();
    const double norm = clip_grad_norm(params, 0.25);
    CHECK(norm == doctest::Approx(std::sqrt(before)).epsilon(1e-6));
    double after = 0.0;
    for (auto* p : params) after += p->grad.cast<double>().squaredNorm();
    CHECK(std::sqrt(after) <= 0.25 + 1e-6);
    CHECK(std::sqrt(after) == doctest::Approx(0.25).epsilon(1e-4));

    // Under the cap nothing moves.
    const auto snapshot = params[0]->grad;
    CHECK(clip_grad_norm(params, 1e6) == doctest::Approx(std::sqrt(after)).epsilon(1e-6));
    CHECK(params[0]->grad == snapshot);
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.lr = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.warmup_ratio = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.grad_clip = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}

TEST_SUITE("training") {
  TEST_CASE("one epoch on a single episode lowers the loss on that episode") {
    const auto ds = one_episode_dataset(5);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr = 1e-3;
    const auto windows = dataset_windows(ds, ModelConfig{}.context, cfg.discount);
    const auto initial = make_initialized_model(ModelConfig{}, 9);
    const double before = evaluate_loss(initial, windows);
    const auto r = train(ds, ModelConfig{}, cfg, 9);
    const double after = evaluate_loss(r.model, windows);
    INFO("before " << before << " after " << after);
    CHECK(after < before);
    CHECK(r.log.steps.size() == 1);
    CHECK(r.log.steps_per_epoch == 1);
    CHECK(r.log.epoch_loss.size() == 1);
  }

  TEST_CASE("several epochs on a single episode drive the training loss down") {
    const auto ds = one_episode_dataset(6);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.lr = 1e-3;
    const auto r = train(ds, ModelConfig{}, cfg, 4);
    REQUIRE(r.log.steps.size() == 8);
    CHECK(r.log.steps.back().loss < r.log.steps.front().loss);
  }

  TEST_CASE("a fixed seed reproduces the run exactly") {
    const auto ds = one_episode_dataset(7, 22);
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto a = train(ds, ModelConfig{}, cfg, 11);
    const auto b = train(ds, ModelConfig{}, cfg, 11);
    REQUIRE(a.log.steps.size() == b.log.steps.size());
    for (std::size_t i = 0; i < a.log.steps.size(); ++i) CHECK(a.log.steps[i].loss == b.log.steps[i].loss);
    CHECK(same_tensors(a.model, b.model));
    CHECK(encode_checkpoint(a.model) == encode_checkpoint(b.model));
  }

  TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
    const auto ds = one_episode_dataset(8, 22);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.lr = 0.0;
    const auto windows = dataset_windows(ds, ModelConfig{}.context, cfg.discount);
    const auto initial = make_initialized_model(ModelConfig{}, 12);
    auto r = train(ds, ModelConfig{}, cfg, 12);
    const auto pa = initial.parameters();
    const auto pb = r.model.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      INFO(pa[i]->name);
      CHECK(pa[i]->value == pb[i]->value);
    }
    for (const auto& s : r.log.steps) CHECK(s.lr == 0.0);
    // Batch-norm running statistics are buffers, not parameters; with them
    // restored the evaluation loss is the same number.
    auto rb = r.model.buffers();
    const auto ib = initial.buffers();
    for (std::size_t i = 0; i < rb.size(); ++i) rb[i]->value = ib[i]->value;
    CHECK(evaluate_loss(r.model, windows) == evaluate_loss(initial, windows));
  }

  TEST_CASE("step log bookkeeping") {
    const auto ds = one_episode_dataset(9, 22);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    int callbacks = 0;
    const auto r = train(ds, ModelConfig{}, cfg, 2, [&](const StepLog&) { ++callbacks; });
    CHECK(r.log.steps_per_epoch == 6);  // ceil(22 / 4)
    CHECK(r.log.steps.size() == 18);
    CHECK(callbacks == 18);
    for (std::size_t i = 0; i < r.log.steps.size(); ++i) {
      const auto& s = r.log.steps[i];
      CHECK(s.step == static_cast<int>(i));
      CHECK(s.epoch == static_cast<int>(i) / 6);
      CHECK(s.lr == doctest::Approx(scheduled_lr(cfg, s.step, 18)));
      CHECK(s.tokens >= 4);
      CHECK(std::isfinite(s.loss));
      CHECK(s.grad_norm >= 0.0);
    }
  }

  TEST_CASE("empty dataset is rejected") {
    CHECK_THROWS_AS(train({}, ModelConfig{}, TrainConfig{}, 1), std::invalid_argument);
  }

  TEST_CASE("behaviour-cloning mode trains") {
    ModelConfig cfg;
    cfg.mode = ModelMode::bc;
    TrainConfig tc;
    tc.epochs = 1;
    const auto r = train(one_episode_dataset(10), cfg, tc, 3);
    CHECK(r.model.config().mode == ModelMode::bc);
    CHECK(std::isfinite(r.log.steps.back().loss));
  }
}

TEST_SUITE("checkpoints") {
  TEST_CASE("round trip is exact") {
    TrainConfig tc;
    tc.epochs = 1;
    const auto r = train(one_episode_dataset(11), ModelConfig{}, tc, 5);
    const auto bytes = encode_checkpoint(r.model);
    const auto back = decode_checkpoint(bytes, ModelConfig{});
    CHECK(back.config() == r.model.config());
    CHECK(same_tensors(back, r.model));
    CHECK(encode_checkpoint(back) == bytes);

    const auto path = scratch("round_trip.ckpt");
    save_checkpoint(path, r.model);
    CHECK(same_tensors(load_checkpoint(path), r.model));
  }

  TEST_CASE("bc config survives the round trip") {
    ModelConfig cfg;
    cfg.mode = ModelMode::bc;
    const auto m = make_initialized_model(cfg, 2);
    CHECK(decode_checkpoint(encode_checkpoint(m)).config().mode == ModelMode::bc);
    CHECK(model_config_from_json(model_config_to_json(cfg)) == cfg);
  }

  TEST_CASE("corruption is classified") {
    const auto m = make_initialized_model(testing::tiny_config(), 4);
    const auto good = encode_checkpoint(m);
    auto kind_of = [](const std::vector<std::uint8_t>& b, const std::optional<ModelConfig>& expected = std::nullopt) {
      try {
        decode_checkpoint(b, expected);
      } catch (const CheckpointError& e) {
        return e.kind();
      }
      FAIL("decode accepted a bad checkpoint");
      return CheckpointErrorKind::io;
    };
    auto bad = good;
    bad[0] = 'X';
    CHECK(kind_of(bad) == CheckpointErrorKind::bad_magic);
    bad = good;
    bad[8] = 9;  // version, little-endian low byte
    CHECK(kind_of(bad) == CheckpointErrorKind::version_mismatch);
    bad.assign(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 2));
    CHECK(kind_of(bad) == CheckpointErrorKind::truncated);
    bad = good;
    bad[good.size() - 40] ^= 0x10;
    CHECK(kind_of(bad) == CheckpointErrorKind::checksum_mismatch);
    CHECK(kind_of(good, ModelConfig{}) == CheckpointErrorKind::config_mismatch);
    CHECK_NOTHROW(decode_checkpoint(good, testing::tiny_config()));

    try {
      load_checkpoint(scratch("missing.ckpt"));
      FAIL("missing file accepted");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointErrorKind::io);
    }
  }
}

TEST_SUITE("rollout") {
  TEST_CASE("greedy rollouts are deterministic") {
    const auto m = make_initialized_model(ModelConfig{}, 21);
    for (std::uint64_t seed : {3u, 17u}) {
      const auto a = rollout(m, seed);
      const auto b = rollout(m, seed);
      CHECK(a.trace.actions == b.trace.actions);
      CHECK(a.trace.rewards == b.trace.rewards);
      REQUIRE(a.distributions.size() == a.trace.actions.size());
      for (std::size_t t = 0; t < a.distributions.size(); ++t) {
        CHECK(a.distributions[t].probs == b.distributions[t].probs);
        // Greedy picks the first maximal action.
        const auto& p = a.distributions[t].probs;
        const auto best = std::max_element(p.begin(), p.end()) - p.begin();
        CHECK(index_of(a.trace.actions[t]) == best);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("constant logits favouring cruise give an all-cruise episode") {
    const auto m = constant_logit_model({0.0f, 0.0f, 0.0f, 0.0f, 3.0f});
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto r = rollout(*m, seed);
      for (Action a : r.trace.actions) CHECK(a == Action::cruise);
    }
  }

  TEST_CASE("ties go to the lowest action index") {
    const auto m = constant_logit_model({0.0f, 0.0f, 0.0f, 0.0f, 0.0f});
    const auto r = rollout(*m, 4);
    for (Action a : r.trace.actions) CHECK(a == Action::llc);
  }

  TEST_CASE("stochastic rollouts are reproducible per episode seed") {
    const auto m = constant_logit_model({0.0f, 0.0f, 0.0f, 0.0f, 0.0f});
    const auto a = rollout(*m, 8, sim::kSampleInteracting, RolloutMode::stochastic);
    const auto b = rollout(*m, 8, sim::kSampleInteracting, RolloutMode::stochastic);
    CHECK(a.trace.actions == b.trace.actions);
    // Uniform sampling over a whole episode is very unlikely to repeat one action.
    const std::set<Action> seen(a.trace.actions.begin(), a.trace.actions.end());
    CHECK(seen.size() > 1);
  }

  TEST_CASE("return-to-go is decremented by rewards and floored at zero") {
    // Context 1 so the next distribution depends only on the current token.
    ModelConfig cfg;
    cfg.context = 1;
    auto m = std::make_shared<SeqModel<float>>(make_initialized_model(cfg, 31));
    const auto world = sim::build_scenario(5, 2);
    const auto grid = obs::render_grid(world);

    auto next_probs = [&](double target, double reward) {
      ModelPolicy p(m, RolloutMode::greedy, target);
      p.begin_episode(5);
      p.decide(world, &grid);
      p.observe(Action::cruise, reward);
      return p.distribution_for(grid, 1).probs;
    };
    // 0.3 - 1.0 floors to 0, the same token as 0 - 0.
    CHECK(next_probs(0.3, 1.0) == next_probs(0.0, 0.0));
    CHECK(next_probs(0.3, 0.2) != next_probs(0.0, 0.0));
    CHECK(next_probs(2.0, 0.5) == next_probs(1.5, 0.0));
  }
}
