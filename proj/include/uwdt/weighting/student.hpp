#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uwdt/data/episode.hpp"
#include "uwdt/nn/train.hpp"
#include "uwdt/weighting/entropy_weights.hpp"

namespace uwdt::weighting {

// Source of per-token predictive entropies for a batch. Read-only.
class EntropyTeacher {
 public:
  virtual ~EntropyTeacher() = default;
  virtual std::vector<double> token_entropies(const nn::TokenInput& input) const = 0;
  // Architecture the student must match, if any.
  virtual std::optional<nn::ModelConfig> config() const { return std::nullopt; }
};

// Eval-mode forward of a frozen model.
class ModelTeacher final : public EntropyTeacher {
 public:
  explicit ModelTeacher(const nn::SeqModel<float>& model) : model_(model) {}
  std::vector<double> token_entropies(const nn::TokenInput& input) const override;
  std::optional<nn::ModelConfig> config() const override { return model_.config(); }

 private:
  const nn::SeqModel<float>& model_;
};

// -(1/M) sum w_t log p_t(a_t). Throws std::invalid_argument on misaligned inputs.
double student_loss(std::span<const nn::ActionDistribution> dists, std::span<const int> targets,
                    std::span<const double> weights);

struct BatchWeightLog {
  int step = 0;
  int tokens = 0;
  double entropy_mean = 0.0;
  double entropy_min = 0.0;
  double entropy_max = 0.0;
  double raw_min = 0.0;
  double raw_max = 0.0;
  double pre_clip_mean = 0.0;
  double post_clip_min = 0.0;
  double post_clip_max = 0.0;
  double fraction_clipped = 0.0;
  double loss = 0.0;
};

BatchWeightLog summarize_batch(const BatchWeights& w, int step);

struct StudentResult {
  nn::SeqModel<float> model;
  nn::TrainLog log;
  std::vector<BatchWeightLog> batches;
};

// Weighted distillation: per mini-batch the teacher's entropies on the same
// windows set the student's token weights. The student starts from `seed`
// (same initialization as plain training with that seed) unless init_from is given.
StudentResult train_student(const EntropyTeacher& teacher, const std::vector<data::Episode>& dataset,
                            const nn::ModelConfig& student_cfg, const nn::TrainConfig& cfg,
                            const WeightSchedule& schedule, std::uint64_t seed,
                            const nn::SeqModel<float>* init_from = nullptr, const nn::StepCallback& on_step = {});

struct EntropyRange {
  double h_min = 0.0;
  double h_max = 0.0;
  int n_episodes = 0;
  std::vector<std::uint64_t> seeds;
};

inline constexpr int kDefaultEntropyEpisodes = 50;

// Greedy rollouts on mixed-density scenarios with seeds base_seed + i; global
// min and max entropy over every decision. Throws std::runtime_error on NaN output.
EntropyRange measure_entropy_range(const nn::SeqModel<float>& teacher, int n_episodes, std::uint64_t base_seed,
                                   int workers = 1);

}  // namespace uwdt::weighting
