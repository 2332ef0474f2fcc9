#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "uwdt/nn/layers.hpp"
#include "uwdt/nn/seq_model.hpp"

namespace uwdt::nn {

inline constexpr double kLogProbFloor = 1e-12;

template <class T>
struct LossGrad {
  double loss = 0.0;
  Mat<T> dlogits;
};

// -(1/M) sum_i w_i log p_i(target_i) over logit rows, with log p floored at
// log(1e-12). Accumulated in double; weights are constants.
template <class T>
LossGrad<T> weighted_nll(const Mat<T>& logits, std::span<const int> targets, std::span<const double> weights) {
  const Eigen::Index m = logits.rows();
  if (m == 0) throw std::invalid_argument("loss over an empty valid set");
  if (static_cast<Eigen::Index>(targets.size()) != m || static_cast<Eigen::Index>(weights.size()) != m)
    throw std::invalid_argument("loss: targets/weights misaligned with logits");
  if (logits.cols() != kNumActions) throw std::invalid_argument("loss: expected one logit per action");
  const double floor = std::log(kLogProbFloor);
  LossGrad<T> out;
  out.dlogits.setZero(m, logits.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int t = targets[i];
    if (t < 0 || t >= kNumActions) throw std::invalid_argument("loss: target outside the action set");
    double mx = static_cast<double>(logits(i, 0));
    for (int a = 1; a < kNumActions; ++a) mx = std::max(mx, static_cast<double>(logits(i, a)));
    double z = 0.0;
    for (int a = 0; a < kNumActions; ++a) z += std::exp(static_cast<double>(logits(i, a)) - mx);
    const double lse = mx + std::log(z);
    const double logp = static_cast<double>(logits(i, t)) - lse;
    sum += weights[i] * -std::max(logp, floor);
    if (logp < floor) continue;
    const double scale = weights[i] / static_cast<double>(m);
    for (int a = 0; a < kNumActions; ++a) {
      const double p = std::exp(static_cast<double>(logits(i, a)) - lse);
      out.dlogits(i, a) = static_cast<T>(scale * (p - (a == t ? 1.0 : 0.0)));
    }
  }
  out.loss = sum / static_cast<double>(m);
  return out;
}

template <class T>
LossGrad<T> nll(const Mat<T>& logits, std::span<const int> targets) {
  const std::vector<double> ones(static_cast<std::size_t>(logits.rows()), 1.0);
  return weighted_nll(logits, targets, std::span<const double>(ones));
}

// Same reductions over explicit distributions.
double weighted_nll_loss(std::span<const ActionDistribution> dists, std::span<const int> targets,
                         std::span<const double> weights);
double nll_loss(std::span<const ActionDistribution> dists, std::span<const int> targets);

}  // namespace uwdt::nn
