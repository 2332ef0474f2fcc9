#include "uwdt/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uwdt/nn/loss.hpp"

namespace uwdt::nn {

namespace {

constexpr std::uint64_t kInitStream = 0x10;
constexpr std::uint64_t kSamplerStream = 0x11;
constexpr std::uint64_t kDropoutStream = 0x12;

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0) throw std::invalid_argument("epochs and batch_size must be positive");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw std::invalid_argument("lr and weight_decay must be non-negative");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw std::invalid_argument("warmup_ratio must be in [0, 1]");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
    throw std::invalid_argument("bad optimizer moments");
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must be in [0, 1)");
}

AdamW::AdamW(const std::vector<Param<float>*>& params, const TrainConfig& cfg) : cfg_(cfg) {
  for (const auto* p : params) {
    m_.push_back(Mat<double>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat<double>::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(const std::vector<Param<float>*>& params, double lr) {
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    double* m = m_[i].data();
    double* v = v_[i].data();
    float* w = p.value.data();
    const float* g = p.grad.data();
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double wk = static_cast<double>(w[k]);
      wk -= lr * cfg_.weight_decay * wk;
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * static_cast<double>(g[k]) * g[k];
      wk -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.adam_eps);
      w[k] = static_cast<float>(wk);
    }
  }
}

double clip_grad_norm(const std::vector<Param<float>*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / (norm + 1e-6));
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

double scheduled_lr(const TrainConfig& cfg, long long step, long long total_steps) {
  const long long warm = std::max<long long>(1, std::llround(cfg.warmup_ratio * static_cast<double>(total_steps)));
  if (cfg.warmup_ratio <= 0.0 || step >= warm) return cfg.lr;
  return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warm);
}

Rng init_rng(std::uint64_t seed) { return Rng::derive(seed, kInitStream); }
Rng sampler_rng(std::uint64_t seed) { return Rng::derive(seed, kSamplerStream); }
Rng dropout_rng(std::uint64_t seed) { return Rng::derive(seed, kDropoutStream); }

SeqModel<float> make_initialized_model(const ModelConfig& cfg, std::uint64_t seed) {
  SeqModel<float> model(cfg);
  Rng rng = init_rng(seed);
  model.initialize(rng);
  return model;
}

TrainLog fit(SeqModel<float>& model, std::span<const data::TokenWindow> windows, const TrainConfig& cfg,
             std::uint64_t seed, const WeightFn& weights, const StepCallback& on_step) {
  cfg.validate();
  if (windows.empty()) throw std::invalid_argument("fit: no training windows");
  for (const auto& w : windows) {
    if (w.context != model.config().context) throw std::invalid_argument("fit: window context differs from the model");
  }
  Rng sampler = sampler_rng(seed);
  Rng dropout = dropout_rng(seed);
  auto params = model.parameters();
  AdamW opt(params, cfg);
  TrainLog log;
  log.steps_per_epoch = static_cast<int>((windows.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long long total = static_cast<long long>(log.steps_per_epoch) * cfg.epochs;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_sum = 0.0;
    for (int s = 0; s < log.steps_per_epoch; ++s, ++step) {
      const data::Batch batch = data::sample_batch(windows, cfg.batch_size, sampler);
      const TokenInput input = gather_tokens(batch);
      ForwardCache<float> cache;
      const Mat<float> logits = model.forward(input, true, &dropout, &cache);
      LossGrad<float> lg;
      if (weights) {
        const std::vector<double> w = weights(batch, input, static_cast<int>(step));
        lg = weighted_nll(logits, input.targets, w);
      } else {
        lg = nll(logits, input.targets);
      }
      if (!std::isfinite(lg.loss)) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << " step " << step;
        throw TrainingDiverged(os.str());
      }
      model.zero_grad();
      model.backward(lg.dlogits, cache);
      model.commit_batch_stats(cache);
      const double norm = clip_grad_norm(params, cfg.grad_clip);
      if (!std::isfinite(norm)) {
        std::ostringstream os;
        os << "non-finite gradient norm at epoch " << epoch << " step " << step;
        throw TrainingDiverged(os.str());
      }
      const double lr = scheduled_lr(cfg, step, total);
      opt.step(params, lr);
      StepLog entry{static_cast<int>(step), epoch, lg.loss, lr, norm, input.total()};
      log.steps.push_back(entry);
      if (on_step) on_step(entry);
      epoch_sum += lg.loss;
    }
    log.epoch_loss.push_back(epoch_sum / log.steps_per_epoch);
  }
  return log;
}

std::vector<data::TokenWindow> dataset_windows(const std::vector<data::Episode>& episodes, int context,
                                               double discount) {
  std::vector<data::TokenWindow> out;
  for (const auto& ep : episodes) {
    auto ws = data::make_windows(ep, context, discount);
    out.insert(out.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  return out;
}

TrainResult train(const std::vector<data::Episode>& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  std::uint64_t seed, const StepCallback& on_step) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const auto windows = dataset_windows(dataset, model_cfg.context, cfg.discount);
  TrainResult r{make_initialized_model(model_cfg, seed), {}};
  r.log = fit(r.model, windows, cfg, seed, {}, on_step);
  return r;
}

double evaluate_loss(const SeqModel<float>& model, std::span<const data::TokenWindow> windows, int batch_size) {
  if (windows.empty()) throw std::invalid_argument("evaluate_loss: no windows");
  double sum = 0.0;
  long long count = 0;
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    std::vector<const data::TokenWindow*> ptrs;
    for (std::size_t j = i; j < std::min(windows.size(), i + batch_size); ++j) ptrs.push_back(&windows[j]);
    const auto batch = data::make_batch(std::move(ptrs));
    const auto input = gather_tokens(batch);
    const auto logits = model.forward(input, false, nullptr, nullptr);
    const auto lg = nll(logits, input.targets);
    sum += lg.loss * input.total();
    count += input.total();
  }
  return sum / static_cast<double>(count);
}

}  // namespace uwdt::nn
