// Command-line pipeline: expert data, teacher/BC/student training, entropy
// range measurement, evaluation and dataset inspection.
//
// Exit codes:
//   0 success
//   2 usage error (unknown flag, bad flag value)
//   3 config schema violation
//   4 missing input artifact
//   5 corrupt or incompatible artifact
//   6 runtime failure (training divergence, NaN outputs)
//   7 I/O failure while writing outputs

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uwdt/common/bytes.hpp"
#include "uwdt/common/runtime.hpp"
#include "uwdt/config/run_config.hpp"
#include "uwdt/data/dataset_io.hpp"
#include "uwdt/eval/metrics.hpp"
#include "uwdt/mcts/expert_data.hpp"
#include "uwdt/mcts/mcts_policy.hpp"
#include "uwdt/nn/checkpoint.hpp"
#include "uwdt/nn/rollout.hpp"
#include "uwdt/nn/train.hpp"
#include "uwdt/weighting/student.hpp"

#ifndef UWDT_VERSION
#define UWDT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uwdt;

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kSchema = 3, kMissing = 4, kCorrupt = 5, kRuntime = 6, kIo = 7 };

struct CliError : std::runtime_error {
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
  int code;
};

const char* category(int code) {
  switch (code) {
    case kUsage: return "usage";
    case kSchema: return "schema";
    case kMissing: return "missing-artifact";
    case kCorrupt: return "corrupt-artifact";
    case kRuntime: return "runtime";
    case kIo: return "io";
    default: return "error";
  }
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON run config");
  app->add_option("--set", c.sets, "Override a config field, e.g. --set train.lr=1e-4");
  app->add_option("--seed", c.seed, "Global seed (config field `seed`)");
  app->add_option("--workers", c.workers, "Parallel episode workers")->check(CLI::PositiveNumber);
}

config::RunConfig resolve_config(const Common& c, std::vector<config::Override> extra) {
  std::vector<config::Override> ov;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw CliError(kUsage, "--set expects key=value, got " + s);
    ov.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  if (c.seed) ov.push_back({"seed", std::to_string(*c.seed)});
  if (c.workers) ov.push_back({"workers", std::to_string(*c.workers)});
  ov.insert(ov.end(), extra.begin(), extra.end());
  std::optional<fs::path> file;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) throw CliError(kMissing, "config file not found: " + c.config_path);
    file = c.config_path;
  }
  return config::resolve(file, ov, std::getenv("UWDT_SEED"));
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw CliError(kUsage, std::string("missing --") + what);
  if (!fs::exists(path)) throw CliError(kMissing, std::string(what) + " not found: " + path);
}

std::string file_crc(const fs::path& p) {
  const auto bytes = data::read_file_bytes(p);
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(bytes));
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw CliError(kIo, "cannot create " + p.parent_path().string());
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(kIo, "cannot create " + p.string());
  out << text;
  out.flush();
  if (!out) throw CliError(kIo, "write failed for " + p.string());
}

void ensure_parent(const fs::path& p) {
  if (!p.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw CliError(kIo, "cannot create " + p.parent_path().string());
}

void write_manifest(const fs::path& path, const std::string& command, const config::RunConfig& cfg,
                    const json& seeds, const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  json m;
  m["tool"] = "uwdt";
  m["version"] = UWDT_VERSION;
  m["command"] = command;
  m["config"] = config::to_json(cfg);
  m["config_hash"] = config::config_hash(cfg);
  m["seeds"] = seeds;
  m["inputs"] = json::array();
  for (const auto& p : inputs) m["inputs"].push_back({{"path", p.string()}, {"crc32", file_crc(p)}});
  m["outputs"] = json::array();
  for (const auto& p : outputs) {
    m["outputs"].push_back({{"path", p.string()}, {"crc32", file_crc(p)}, {"bytes", fs::file_size(p)}});
  }
  write_text(path, m.dump(2) + "\n");
}

fs::path manifest_for(const fs::path& artifact) { return fs::path(artifact.string() + ".manifest.json"); }

std::vector<data::Episode> load_dataset(const std::string& path) {
  require_input(path, "data");
  return data::read_dataset(path);
}

nn::SeqModel<float> load_model(const std::string& path, const char* what) {
  require_input(path, what);
  return nn::load_checkpoint(path);
}

std::string loss_csv(const nn::TrainLog& log) {
  std::ostringstream os;
  os << "step,epoch,loss,lr,grad_norm,tokens\n";
  char buf[160];
  for (const auto& s : log.steps) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6e,%.6f,%d\n", s.step, s.epoch, s.loss, s.lr, s.grad_norm, s.tokens);
    os << buf;
  }
  return os.str();
}

nn::StepCallback progress(int steps_per_epoch) {
  return [steps_per_epoch](const nn::StepLog& s) {
    if (steps_per_epoch > 0 && (s.step + 1) % steps_per_epoch == 0) {
      std::fprintf(stderr, "epoch %d done (step %d, loss %.4f)\n", s.epoch + 1, s.step + 1, s.loss);
    }
  };
}

int steps_per_epoch(const std::vector<data::Episode>& eps, int batch) {
  long long windows = 0;
  for (const auto& e : eps) windows += e.steps();
  return static_cast<int>((windows + batch - 1) / batch);
}

// --- subcommands -----------------------------------------------------------

int cmd_gen_data(const Common& c, std::optional<int> episodes, std::optional<int> simulations, const std::string& out) {
  std::vector<config::Override> ov;
  if (episodes) ov.push_back({"mcts.episodes", std::to_string(*episodes)});
  if (simulations) ov.push_back({"mcts.simulations", std::to_string(*simulations)});
  const auto cfg = resolve_config(c, ov);
  if (out.empty()) throw CliError(kUsage, "missing --out");
  ensure_parent(out);
  std::fprintf(stderr, "generating %d expert episodes (seed %llu, %d workers)\n", cfg.mcts.episodes,
               static_cast<unsigned long long>(cfg.seed), cfg.workers);
  const auto eps = mcts::generate_dataset(cfg.mcts.episodes, cfg.mcts.search, cfg.seed, cfg.workers);
  data::write_dataset(out, eps);
  write_manifest(manifest_for(out), "gen-data", cfg,
                 {{"episode_seed_first", cfg.seed}, {"episode_seed_last", cfg.seed + cfg.mcts.episodes - 1}}, {},
                 {out});
  std::printf("wrote %s (%d episodes, crc32 %s)\n", out.c_str(), cfg.mcts.episodes, file_crc(out).c_str());
  return kOk;
}

int cmd_train(const Common& c, nn::ModelMode mode, const std::string& data_path, std::optional<int> epochs,
              const std::string& out, const char* command) {
  std::vector<config::Override> ov;
  if (epochs) ov.push_back({"train.epochs", std::to_string(*epochs)});
  auto cfg = resolve_config(c, ov);
  cfg.model.mode = mode;
  if (out.empty()) throw CliError(kUsage, "missing --out");
  const auto eps = load_dataset(data_path);
  ensure_parent(out);
  std::fprintf(stderr, "%s: %zu episodes, %d epochs\n", command, eps.size(), cfg.train.epochs);
  const auto result =
      nn::train(eps, cfg.model, cfg.train, cfg.seed, progress(steps_per_epoch(eps, cfg.train.batch_size)));
  nn::save_checkpoint(out, result.model);
  const fs::path loss_path = out + ".loss.csv";
  write_text(loss_path, loss_csv(result.log));
  write_manifest(manifest_for(out), command, cfg, {{"train_seed", cfg.seed}}, {data_path}, {out, loss_path});
  std::printf("wrote %s (final epoch loss %.4f)\n", out.c_str(), result.log.epoch_loss.back());
  return kOk;
}

int cmd_measure_entropy(const Common& c, const std::string& teacher_path, std::optional<int> episodes, bool full_scale,
                        const std::string& out) {
  std::vector<config::Override> ov;
  if (full_scale) ov.push_back({"uwdt.entropy_episodes", "400"});
  if (episodes) ov.push_back({"uwdt.entropy_episodes", std::to_string(*episodes)});
  const auto cfg = resolve_config(c, ov);
  if (out.empty()) throw CliError(kUsage, "missing --out");
  const auto teacher = load_model(teacher_path, "teacher");
  ensure_parent(out);
  const auto range =
      weighting::measure_entropy_range(teacher, cfg.uwdt.entropy_episodes, cfg.entropy_base_seed(), cfg.workers);
  std::fprintf(stderr, "entropy range over %d episodes: [%.6f, %.6f]\n", range.n_episodes, range.h_min, range.h_max);
  weighting::WeightSchedule s;
  try {
    s = weighting::WeightSchedule::build(cfg.uwdt.r, cfg.uwdt.w_max, range.h_min, range.h_max);
  } catch (const std::invalid_argument& e) {
    throw CliError(kRuntime, std::string("cannot build a weight schedule: ") + e.what());
  }
  s.n_episodes = range.n_episodes;
  s.seeds = range.seeds;
  write_text(out, s.to_json().dump(2) + "\n");
  write_manifest(manifest_for(out), "measure-entropy", cfg,
                 {{"entropy_seed_first", cfg.entropy_base_seed()}, {"episodes", range.n_episodes}}, {teacher_path},
                 {out});
  std::printf("wrote %s (h_min %.6f, h_max %.6f, beta %.6f)\n", out.c_str(), s.h_min, s.h_max, s.beta);
  return kOk;
}

int cmd_train_student(const Common& c, const std::string& teacher_path, const std::string& schedule_path,
                      const std::string& data_path, std::optional<int> epochs, bool init_from_teacher,
                      const std::string& out) {
  std::vector<config::Override> ov;
  if (epochs) ov.push_back({"train.epochs", std::to_string(*epochs)});
  if (init_from_teacher) ov.push_back({"uwdt.init_from_teacher", "true"});
  const auto cfg = resolve_config(c, ov);
  if (out.empty()) throw CliError(kUsage, "missing --out");
  const auto teacher = load_model(teacher_path, "teacher");
  require_input(schedule_path, "schedule");
  weighting::WeightSchedule schedule;
  try {
    std::ifstream in(schedule_path);
    schedule = weighting::WeightSchedule::from_json(json::parse(in));
  } catch (const std::exception& e) {
    throw CliError(kCorrupt, std::string("bad schedule file: ") + e.what());
  }
  const auto eps = load_dataset(data_path);
  if (teacher.config().mode != nn::ModelMode::return_conditioned) {
    throw CliError(kCorrupt, "teacher checkpoint " + teacher_path + " is not return-conditioned");
  }
  ensure_parent(out);
  const nn::ModelConfig student_cfg = teacher.config();
  std::fprintf(stderr, "train-student: %zu episodes, %d epochs, beta %.6f\n", eps.size(), cfg.train.epochs,
               schedule.beta);
  const weighting::ModelTeacher t(teacher);
  const auto result =
      weighting::train_student(t, eps, student_cfg, cfg.train, schedule, cfg.seed,
                               cfg.uwdt.init_from_teacher ? &teacher : nullptr,
                               progress(steps_per_epoch(eps, cfg.train.batch_size)));
  nn::save_checkpoint(out, result.model);
  const fs::path loss_path = out + ".loss.csv";
  write_text(loss_path, loss_csv(result.log));
  const fs::path weights_path = out + ".weights.csv";
  std::ostringstream os;
  os << "step,tokens,entropy_mean,entropy_min,entropy_max,pre_clip_mean,post_clip_min,post_clip_max,fraction_clipped,"
        "loss\n";
  char buf[256];
  for (const auto& b : result.batches) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%.6f,%.12f,%.6f,%.6f,%.6f,%.6f\n", b.step, b.tokens,
                  b.entropy_mean, b.entropy_min, b.entropy_max, b.pre_clip_mean, b.post_clip_min, b.post_clip_max,
                  b.fraction_clipped, b.loss);
    os << buf;
  }
  write_text(weights_path, os.str());
  const fs::path schedule_copy = out + ".schedule.json";
  write_text(schedule_copy, schedule.to_json().dump(2) + "\n");
  write_manifest(manifest_for(out), "train-student", cfg, {{"train_seed", cfg.seed}},
                 {teacher_path, schedule_path, data_path}, {out, loss_path, weights_path, schedule_copy});
  std::printf("wrote %s (final epoch loss %.4f)\n", out.c_str(), result.log.epoch_loss.back());
  return kOk;
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& models, bool with_random, bool with_mcts,
                 std::optional<int> episodes, const std::vector<std::string>& densities, const std::string& out_dir) {
  std::vector<config::Override> ov;
  if (episodes) ov.push_back({"eval.episodes_per_density", std::to_string(*episodes)});
  if (!out_dir.empty()) ov.push_back({"eval.output_dir", json(out_dir).dump()});
  if (!densities.empty()) ov.push_back({"scenario.densities", json(densities).dump()});
  const auto cfg = resolve_config(c, ov);

  std::vector<std::unique_ptr<eval::Policy>> policies;
  std::vector<fs::path> inputs;
  std::vector<std::shared_ptr<const nn::SeqModel<float>>> keep;
  for (const auto& spec : models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw CliError(kUsage, "--model expects name=checkpoint, got " + spec);
    const std::string name = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    auto m = std::make_shared<const nn::SeqModel<float>>(load_model(path, "model checkpoint"));
    keep.push_back(m);
    inputs.emplace_back(path);
    policies.push_back(
        std::make_unique<nn::ModelPolicy>(m, nn::RolloutMode::greedy, cfg.eval.target_return, name));
  }
  if (with_random) policies.push_back(std::make_unique<eval::RandomPolicy>());
  if (with_mcts) policies.push_back(std::make_unique<mcts::MctsPolicy>(cfg.mcts.search));
  if (policies.empty()) throw CliError(kUsage, "nothing to evaluate: pass --model, --random or --mcts");

  const fs::path dir = cfg.eval.output_dir;
  std::vector<eval::Aggregate> aggregates;
  std::vector<eval::ProfileRow> profiles;
  std::vector<eval::EntropyRow> entropy_rows;
  for (const auto& p : policies) {
    for (auto d : cfg.scenario.densities) {
      const std::string dn = eval::density_name(d);
      std::fprintf(stderr, "evaluating %s at %s density (%d episodes)\n", p->name().c_str(), dn.c_str(),
                   cfg.eval.episodes_per_density);
      const auto records = eval::run_eval(*p, d, cfg.eval.episodes_per_density, cfg.eval_base_seed(), cfg.workers);
      aggregates.push_back(eval::aggregate(records, p->name(), dn));
      const auto prof = eval::step_profiles(records, p->name(), dn);
      profiles.insert(profiles.end(), prof.begin(), prof.end());
      const bool has_entropy = std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.entropies.empty(); });
      if (has_entropy) entropy_rows.push_back({p->name(), dn, eval::entropy_stats(records)});
    }
  }
  try {
    eval::emit_results(aggregates, profiles, dir, entropy_rows);
  } catch (const std::runtime_error& e) {
    throw CliError(kIo, e.what());
  }
  std::vector<fs::path> outputs{dir / "summary.csv", dir / "profiles.csv"};
  if (!entropy_rows.empty()) outputs.push_back(dir / "entropy.csv");
  write_manifest(dir / "manifest.json", "evaluate", cfg,
                 {{"eval_seed_first", cfg.eval_base_seed()}, {"episodes_per_density", cfg.eval.episodes_per_density}},
                 inputs, outputs);
  std::cout << eval::summary_csv(aggregates);
  return kOk;
}

const char* cause_name(data::TerminalCause c) {
  switch (c) {
    case data::TerminalCause::collision: return "collision";
    case data::TerminalCause::exit: return "exit";
    default: return "horizon";
  }
}

int cmd_dataset_inspect(const std::string& data_path) {
  const auto eps = load_dataset(data_path);
  long long steps = 0;
  std::map<std::string, int> causes;
  std::array<long long, kNumActions> actions{};
  double reward = 0.0;
  for (const auto& e : eps) {
    steps += e.steps();
    causes[cause_name(e.cause)]++;
    for (auto a : e.actions) actions[a]++;
    for (float r : e.rewards) reward += r;
  }
  std::printf("file: %s\ncrc32: %s\nepisodes: %zu\nsteps: %lld\n", data_path.c_str(), file_crc(data_path).c_str(),
              eps.size(), steps);
  std::printf("mean episode reward: %.4f\n", eps.empty() ? 0.0 : reward / static_cast<double>(eps.size()));
  for (const auto& [k, v] : causes) std::printf("cause %s: %d\n", k.c_str(), v);
  for (int a = 0; a < kNumActions; ++a) {
    std::printf("action %s: %lld\n", std::string(name_of(static_cast<Action>(a))).c_str(), actions[a]);
  }
  std::printf("episode,steps,cause,reward\n");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const auto& e = eps[i];
    double sum = 0.0;
    for (float r : e.rewards) sum += r;
    std::printf("%zu,%d,%s,%.4f\n", i, e.steps(), cause_name(e.cause), sum);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Uncertainty-weighted decision transformer pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", UWDT_VERSION);

  Common common;
  std::optional<int> episodes, simulations, epochs;
  std::string out, data_path, teacher_path, schedule_path, out_dir;
  bool full_scale = false, init_from_teacher = false, with_random = false, with_mcts = false;
  std::vector<std::string> models, densities;

  auto* gen = app.add_subcommand("gen-data", "Generate an expert dataset with the tree-search planner");
  add_common(gen, common);
  gen->add_option("--episodes", episodes, "Number of expert episodes")->check(CLI::PositiveNumber);
  gen->add_option("--simulations", simulations, "Planner simulations per decision")->check(CLI::PositiveNumber);
  gen->add_option("--out", out, "Dataset file")->required();

  auto* tt = app.add_subcommand("train-teacher", "Train the return-conditioned teacher");
  add_common(tt, common);
  tt->add_option("--data", data_path, "Dataset file")->required();
  tt->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  tt->add_option("--out", out, "Checkpoint file")->required();

  auto* tb = app.add_subcommand("train-bc", "Train the behaviour-cloning baseline (no return tokens)");
  add_common(tb, common);
  tb->add_option("--data", data_path, "Dataset file")->required();
  tb->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  tb->add_option("--out", out, "Checkpoint file")->required();

  auto* me = app.add_subcommand("measure-entropy", "Measure the teacher's entropy range and write a weight schedule");
  add_common(me, common);
  me->add_option("--teacher", teacher_path, "Teacher checkpoint")->required();
  me->add_option("--episodes", episodes, "Rollout episodes")->check(CLI::PositiveNumber);
  me->add_flag("--full-scale", full_scale, "Use 400 rollout episodes");
  me->add_option("--out", out, "Schedule JSON")->required();

  auto* ts = app.add_subcommand("train-student", "Entropy-weighted student training");
  add_common(ts, common);
  ts->add_option("--teacher", teacher_path, "Teacher checkpoint")->required();
  ts->add_option("--schedule", schedule_path, "Schedule JSON from measure-entropy")->required();
  ts->add_option("--data", data_path, "Dataset file")->required();
  ts->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  ts->add_flag("--init-from-teacher", init_from_teacher, "Start from the teacher's weights");
  ts->add_option("--out", out, "Checkpoint file")->required();

  auto* ev = app.add_subcommand("evaluate", "Evaluate policies and write summary/profile CSVs");
  add_common(ev, common);
  ev->add_option("--model", models, "name=checkpoint (repeatable)");
  ev->add_flag("--random", with_random, "Include the uniform-random policy");
  ev->add_flag("--mcts", with_mcts, "Include the tree-search expert");
  ev->add_option("--episodes", episodes, "Episodes per density")->check(CLI::PositiveNumber);
  ev->add_option("--densities", densities, "Density levels (low, medium, high, mixed)")->delimiter(',');
  ev->add_option("--out-dir", out_dir, "Output directory");

  auto* di = app.add_subcommand("dataset-inspect", "Validate a dataset file and print a summary");
  di->add_option("--data", data_path, "Dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common, episodes, simulations, out);
    if (tt->parsed()) return cmd_train(common, nn::ModelMode::return_conditioned, data_path, epochs, out, "train-teacher");
    if (tb->parsed()) return cmd_train(common, nn::ModelMode::bc, data_path, epochs, out, "train-bc");
    if (me->parsed()) return cmd_measure_entropy(common, teacher_path, episodes, full_scale, out);
    if (ts->parsed()) {
      return cmd_train_student(common, teacher_path, schedule_path, data_path, epochs, init_from_teacher, out);
    }
    if (ev->parsed()) return cmd_evaluate(common, models, with_random, with_mcts, episodes, densities, out_dir);
    if (di->parsed()) return cmd_dataset_inspect(data_path);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error[%s]: %s\n", category(e.code), e.what());
    return e.code;
  } catch (const config::SchemaError& e) {
    std::fprintf(stderr, "error[%s]: %s\n", category(kSchema), e.what());
    return kSchema;
  } catch (const data::DatasetError& e) {
    const int code = e.kind() == data::DatasetErrorKind::io ? kIo : kCorrupt;
    std::fprintf(stderr, "error[%s]: %s\n", category(code), e.what());
    return code;
  } catch (const nn::CheckpointError& e) {
    const int code = e.kind() == nn::CheckpointErrorKind::io ? kIo : kCorrupt;
    std::fprintf(stderr, "error[%s]: %s\n", category(code), e.what());
    return code;
  } catch (const nn::TrainingDiverged& e) {
    std::fprintf(stderr, "error[%s]: training diverged: %s\n", category(kRuntime), e.what());
    return kRuntime;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error[%s]: %s\n", category(kSchema), e.what());
    return kSchema;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[%s]: %s\n", category(kRuntime), e.what());
    return kRuntime;
  }
  return kUsage;
}
