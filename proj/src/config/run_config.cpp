#include "uwdt/config/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "uwdt/common/bytes.hpp"
#include "uwdt/nn/checkpoint.hpp"

namespace uwdt::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw SchemaError("unknown key " + where + "." + k);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError("wrong type for " + where + "." + key);
  }
}

std::string rollout_name(mcts::RolloutPolicy p) {
  return p == mcts::RolloutPolicy::uniform_random ? "uniform_random" : "cruise_default";
}

mcts::RolloutPolicy rollout_from_name(const std::string& s) {
  if (s == "uniform_random") return mcts::RolloutPolicy::uniform_random;
  if (s == "cruise_default") return mcts::RolloutPolicy::cruise_default;
  throw SchemaError("unknown mcts.rollout: " + s);
}

}  // namespace

nlohmann::json train_config_to_json(const nn::TrainConfig& t) {
  return {{"epochs", t.epochs},         {"batch_size", t.batch_size},     {"lr", t.lr},
          {"weight_decay", t.weight_decay}, {"warmup_ratio", t.warmup_ratio}, {"grad_clip", t.grad_clip},
          {"beta1", t.beta1},           {"beta2", t.beta2},               {"adam_eps", t.adam_eps},
          {"discount", t.discount}};
}

json to_json(const RunConfig& c) {
  std::vector<std::string> dens;
  for (auto d : c.scenario.densities) dens.push_back(eval::density_name(d));
  return {
      {"seed", c.seed},
      {"workers", c.workers},
      {"scenario", {{"densities", dens}}},
      {"mcts",
       {{"simulations", c.mcts.search.simulations},
        {"exploration", c.mcts.search.exploration},
        {"rollout_depth", c.mcts.search.rollout_depth},
        {"rollout", rollout_name(c.mcts.search.rollout)},
        {"discount", c.mcts.search.discount},
        {"episodes", c.mcts.episodes}}},
      {"model", nn::model_config_to_json(c.model)},
      {"train", train_config_to_json(c.train)},
      {"uwdt",
       {{"r", c.uwdt.r},
        {"w_max", c.uwdt.w_max},
        {"entropy_episodes", c.uwdt.entropy_episodes},
        {"init_from_teacher", c.uwdt.init_from_teacher}}},
      {"eval",
       {{"episodes_per_density", c.eval.episodes_per_density},
        {"output_dir", c.eval.output_dir},
        {"target_return", c.eval.target_return}}},
  };
}

RunConfig from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, {"seed", "workers", "scenario", "mcts", "model", "train", "uwdt", "eval"}, "config");
  read(j, "seed", c.seed, "config");
  read(j, "workers", c.workers, "config");
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    reject_unknown(s, {"densities"}, "scenario");
    std::vector<std::string> dens;
    read(s, "densities", dens, "scenario");
    if (s.contains("densities")) {
      c.scenario.densities.clear();
      for (const auto& d : dens) {
        try {
          c.scenario.densities.push_back(eval::density_from_name(d));
        } catch (const std::invalid_argument& e) {
          throw SchemaError(e.what());
        }
      }
    }
  }
  if (j.contains("mcts")) {
    const auto& m = j.at("mcts");
    reject_unknown(m, {"simulations", "exploration", "rollout_depth", "rollout", "discount", "episodes"}, "mcts");
    read(m, "simulations", c.mcts.search.simulations, "mcts");
    read(m, "exploration", c.mcts.search.exploration, "mcts");
    read(m, "rollout_depth", c.mcts.search.rollout_depth, "mcts");
    read(m, "discount", c.mcts.search.discount, "mcts");
    read(m, "episodes", c.mcts.episodes, "mcts");
    std::string rollout;
    read(m, "rollout", rollout, "mcts");
    if (m.contains("rollout")) c.mcts.search.rollout = rollout_from_name(rollout);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"encoder", "context", "d_model", "layers", "heads", "max_timestep", "return_scale", "mode"},
                   "model");
    if (m.contains("encoder")) {
      reject_unknown(m.at("encoder"),
                     {"in_channels", "height", "width", "channels", "embed", "dropout", "bn_momentum", "bn_eps"},
                     "model.encoder");
    }
    try {
      c.model = nn::model_config_from_json(m);
    } catch (const std::exception& e) {
      throw SchemaError(e.what());
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t, {"epochs", "batch_size", "lr", "weight_decay", "warmup_ratio", "grad_clip", "beta1", "beta2",
                       "adam_eps", "discount"},
                   "train");
    read(t, "epochs", c.train.epochs, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "lr", c.train.lr, "train");
    read(t, "weight_decay", c.train.weight_decay, "train");
    read(t, "warmup_ratio", c.train.warmup_ratio, "train");
    read(t, "grad_clip", c.train.grad_clip, "train");
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "adam_eps", c.train.adam_eps, "train");
    read(t, "discount", c.train.discount, "train");
  }
  if (j.contains("uwdt")) {
    const auto& u = j.at("uwdt");
    reject_unknown(u, {"r", "w_max", "entropy_episodes", "init_from_teacher"}, "uwdt");
    read(u, "r", c.uwdt.r, "uwdt");
    read(u, "w_max", c.uwdt.w_max, "uwdt");
    read(u, "entropy_episodes", c.uwdt.entropy_episodes, "uwdt");
    read(u, "init_from_teacher", c.uwdt.init_from_teacher, "uwdt");
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, {"episodes_per_density", "output_dir", "target_return"}, "eval");
    read(e, "episodes_per_density", c.eval.episodes_per_density, "eval");
    read(e, "output_dir", c.eval.output_dir, "eval");
    read(e, "target_return", c.eval.target_return, "eval");
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  try {
    mcts.search.validate();
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  if (workers < 1) throw SchemaError("workers must be >= 1");
  if (mcts.episodes < 1) throw SchemaError("mcts.episodes must be >= 1");
  if (scenario.densities.empty()) throw SchemaError("scenario.densities must not be empty");
  if (!(uwdt.r > 1.0)) throw SchemaError("uwdt.r must exceed 1");
  if (!(uwdt.w_max >= 1.0)) throw SchemaError("uwdt.w_max must be at least 1");
  if (uwdt.entropy_episodes < 1) throw SchemaError("uwdt.entropy_episodes must be >= 1");
  if (eval.episodes_per_density < 1) throw SchemaError("eval.episodes_per_density must be >= 1");
  if (!(eval.target_return >= 0.0)) throw SchemaError("eval.target_return must be non-negative");
  if (eval.output_dir.empty()) throw SchemaError("eval.output_dir must not be empty");
}

RunConfig resolve(const std::optional<std::filesystem::path>& file, const std::vector<Override>& overrides,
                  const char* env_seed) {
  json j = to_json(RunConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw std::runtime_error("cannot open config " + file->string());
    json f;
    try {
      f = json::parse(in);
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!f.is_object()) throw SchemaError("config must be a JSON object");
    // Validate the file alone first so unknown keys are reported against it.
    (void)from_json(f);
    j.merge_patch(f);
  }
  for (const auto& o : overrides) {
    json value;
    try {
      value = json::parse(o.value);
    } catch (const json::parse_error&) {
      value = o.value;
    }
    json* node = &j;
    std::stringstream ss(o.key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw SchemaError("empty override key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object() || !node->contains(parts[i])) throw SchemaError("unknown key " + o.key);
      node = &(*node)[parts[i]];
    }
    if (!node->is_object() || !node->contains(parts.back())) throw SchemaError("unknown key " + o.key);
    (*node)[parts.back()] = value;
  }
  if (env_seed != nullptr && *env_seed != '\0') {
    try {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(env_seed, &used);
      if (used != std::string(env_seed).size()) throw std::invalid_argument("trailing characters");
      j["seed"] = s;
    } catch (const std::exception&) {
      throw SchemaError(std::string("UWDT_SEED is not an unsigned integer: ") + env_seed);
    }
  }
  return from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  const std::uint32_t crc =
      crc32_of(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

}  // namespace uwdt::config
