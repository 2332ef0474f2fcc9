#include "uwdt/weighting/student.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "uwdt/common/parallel.hpp"
#include "uwdt/nn/loss.hpp"
#include "uwdt/nn/rollout.hpp"

namespace uwdt::weighting {

std::vector<double> ModelTeacher::token_entropies(const nn::TokenInput& input) const {
  const nn::Mat<float> logits = model_.forward(input, false, nullptr, nullptr);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out.push_back(entropy(nn::distribution_row(logits, i)));
  return out;
}

double student_loss(std::span<const nn::ActionDistribution> dists, std::span<const int> targets,
                    std::span<const double> weights) {
  return nn::weighted_nll_loss(dists, targets, weights);
}

BatchWeightLog summarize_batch(const BatchWeights& w, int step) {
  BatchWeightLog l;
  l.step = step;
  l.tokens = static_cast<int>(w.weights.size());
  double hs = 0.0;
  double ns = 0.0;
  int clipped = 0;
  l.entropy_min = l.raw_min = l.post_clip_min = std::numeric_limits<double>::infinity();
  l.entropy_max = l.raw_max = l.post_clip_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    hs += w.entropies[i];
    ns += w.normalized[i];
    l.entropy_min = std::min(l.entropy_min, w.entropies[i]);
    l.entropy_max = std::max(l.entropy_max, w.entropies[i]);
    l.raw_min = std::min(l.raw_min, w.raw[i]);
    l.raw_max = std::max(l.raw_max, w.raw[i]);
    l.post_clip_min = std::min(l.post_clip_min, w.weights[i]);
    l.post_clip_max = std::max(l.post_clip_max, w.weights[i]);
    if (w.weights[i] < w.normalized[i]) ++clipped;
  }
  const double m = static_cast<double>(w.weights.size());
  l.entropy_mean = hs / m;
  l.pre_clip_mean = ns / m;
  l.fraction_clipped = clipped / m;
  return l;
}

StudentResult train_student(const EntropyTeacher& teacher, const std::vector<data::Episode>& dataset,
                            const nn::ModelConfig& student_cfg, const nn::TrainConfig& cfg,
                            const WeightSchedule& schedule, std::uint64_t seed, const nn::SeqModel<float>* init_from,
                            const nn::StepCallback& on_step) {
  if (dataset.empty()) throw std::invalid_argument("train_student: empty dataset");
  schedule.validate();
  if (const auto tc = teacher.config(); tc && !(*tc == student_cfg))
    throw std::invalid_argument("train_student: teacher and student configs differ");
  if (init_from != nullptr && !(init_from->config() == student_cfg))
    throw std::invalid_argument("train_student: initial weights do not match the student config");

  StudentResult r{init_from != nullptr ? *init_from : nn::make_initialized_model(student_cfg, seed), {}, {}};
  const auto windows = nn::dataset_windows(dataset, student_cfg.context, cfg.discount);
  auto weight_fn = [&](const data::Batch&, const nn::TokenInput& input, int step) {
    const std::vector<double> h = teacher.token_entropies(input);
    if (h.size() != static_cast<std::size_t>(input.total()))
      throw std::invalid_argument("train_student: teacher returned misaligned entropies");
    const BatchWeights w = batch_weights(h, schedule);
    r.batches.push_back(summarize_batch(w, step));
    return w.weights;
  };
  r.log = nn::fit(r.model, windows, cfg, seed, weight_fn, on_step);
  for (std::size_t i = 0; i < r.batches.size() && i < r.log.steps.size(); ++i) r.batches[i].loss = r.log.steps[i].loss;
  return r;
}

EntropyRange measure_entropy_range(const nn::SeqModel<float>& teacher, int n_episodes, std::uint64_t base_seed,
                                   int workers) {
  if (n_episodes < 1) throw std::invalid_argument("measure_entropy_range: n_episodes must be >= 1");
  std::vector<std::pair<double, double>> per(static_cast<std::size_t>(n_episodes));
  parallel_for(per.size(), workers, [&](std::size_t i) {
    const auto ro = nn::rollout(teacher, base_seed + i);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& d : ro.distributions) {
      const double h = entropy(d);
      if (!std::isfinite(h)) throw std::runtime_error("teacher produced a non-finite entropy");
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    per[i] = {lo, hi};
  });
  EntropyRange range;
  range.h_min = std::numeric_limits<double>::infinity();
  range.h_max = -range.h_min;
  for (const auto& [lo, hi] : per) {
    range.h_min = std::min(range.h_min, lo);
    range.h_max = std::max(range.h_max, hi);
  }
  range.n_episodes = n_episodes;
  for (int i = 0; i < n_episodes; ++i) range.seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
  return range;
}

}  // namespace uwdt::weighting
