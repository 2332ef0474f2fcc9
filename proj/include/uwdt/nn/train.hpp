#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "uwdt/data/episode.hpp"
#include "uwdt/data/windows.hpp"
#include "uwdt/nn/seq_model.hpp"

namespace uwdt::nn {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  double lr = 1e-5;
  double weight_decay = 5e-5;
  double warmup_ratio = 0.1;
  double grad_clip = 0.25;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double discount = data::kReturnDiscount;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepLog {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // before clipping
  int tokens = 0;
};

struct TrainLog {
  int steps_per_epoch = 0;
  std::vector<StepLog> steps;
  std::vector<double> epoch_loss;  // mean step loss per epoch
};

// Decoupled weight decay Adam over float parameters.
class AdamW {
 public:
  AdamW(const std::vector<Param<float>*>& params, const TrainConfig& cfg);
  void step(const std::vector<Param<float>*>& params, double lr);
  long long steps_taken() const { return t_; }

 private:
  TrainConfig cfg_;
  long long t_ = 0;
  std::vector<Mat<double>> m_;
  std::vector<Mat<double>> v_;
};

// Scales gradients so the global L2 norm is at most max_norm; returns the norm before scaling.
double clip_grad_norm(const std::vector<Param<float>*>& params, double max_norm);

// Learning rate at a 0-based step: linear ramp over the warm-up steps, then constant.
double scheduled_lr(const TrainConfig& cfg, long long step, long long total_steps);

// Per-token loss weights for one batch, aligned with TokenInput order.
using WeightFn = std::function<std::vector<double>(const data::Batch&, const TokenInput&, int step)>;
using StepCallback = std::function<void(const StepLog&)>;

// Random streams used by a training run with the given seed.
Rng init_rng(std::uint64_t seed);
Rng sampler_rng(std::uint64_t seed);
Rng dropout_rng(std::uint64_t seed);

SeqModel<float> make_initialized_model(const ModelConfig& cfg, std::uint64_t seed);

// Trains in place. Each epoch is ceil(windows / batch) steps of batches drawn
// with replacement. Without a weight function every token has weight 1.
// Throws TrainingDiverged on a non-finite loss or gradient.
TrainLog fit(SeqModel<float>& model, std::span<const data::TokenWindow> windows, const TrainConfig& cfg,
             std::uint64_t seed, const WeightFn& weights = {}, const StepCallback& on_step = {});

std::vector<data::TokenWindow> dataset_windows(const std::vector<data::Episode>& episodes, int context,
                                               double discount);

struct TrainResult {
  SeqModel<float> model;
  TrainLog log;
};

// Fresh model from `seed`, then fit. Throws std::invalid_argument on an empty dataset.
TrainResult train(const std::vector<data::Episode>& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  std::uint64_t seed, const StepCallback& on_step = {});

// Eval-mode mean NLL over every valid token of the windows.
double evaluate_loss(const SeqModel<float>& model, std::span<const data::TokenWindow> windows, int batch_size = 16);

}  // namespace uwdt::nn
