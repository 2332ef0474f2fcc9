#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uwdt/eval/metrics.hpp"
#include "uwdt/mcts/uct_planner.hpp"
#include "uwdt/nn/seq_model.hpp"
#include "uwdt/nn/train.hpp"

namespace uwdt::config {

// Unknown key, wrong type or out-of-range value.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioSection {
  std::vector<eval::Density> densities{eval::Density::low, eval::Density::medium, eval::Density::high};
};

struct MctsSection {
  mcts::SearchConfig search;
  int episodes = 500;
};

struct UwdtSection {
  double r = 1.3;
  double w_max = 1.5;
  int entropy_episodes = 50;
  bool init_from_teacher = false;
};

struct EvalSection {
  int episodes_per_density = 20;
  std::string output_dir = "results";
  double target_return = 22.0;
};

// Every seed in a run derives from `seed`: expert episode i uses seed + i,
// training uses seed, entropy measurement uses seed + kEntropySeedOffset + i,
// evaluation uses seed + kEvalSeedOffset + i.
struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  ScenarioSection scenario;
  MctsSection mcts;
  nn::ModelConfig model;
  nn::TrainConfig train;
  UwdtSection uwdt;
  EvalSection eval;

  static constexpr std::uint64_t kEntropySeedOffset = 1'000'000;
  static constexpr std::uint64_t kEvalSeedOffset = 2'000'000;

  std::uint64_t entropy_base_seed() const { return seed + kEntropySeedOffset; }
  std::uint64_t eval_base_seed() const { return seed + kEvalSeedOffset; }

  void validate() const;  // throws SchemaError
};

nlohmann::json to_json(const RunConfig& cfg);
// Strict: unknown keys and type mismatches throw SchemaError. Missing keys keep defaults.
RunConfig from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const nn::TrainConfig& cfg);

// One "dotted.key=value" override; value is parsed as JSON, falling back to a string.
struct Override {
  std::string key;
  std::string value;
};

// defaults <- file <- overrides <- UWDT_SEED. Throws SchemaError on bad input
// and std::runtime_error when the file cannot be read.
RunConfig resolve(const std::optional<std::filesystem::path>& file, const std::vector<Override>& overrides,
                  const char* env_seed = nullptr);

// CRC-32 of the canonical JSON dump, as 8 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace uwdt::config
