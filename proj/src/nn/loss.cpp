#include "uwdt/nn/loss.hpp"

namespace uwdt::nn {

double weighted_nll_loss(std::span<const ActionDistribution> dists, std::span<const int> targets,
                         std::span<const double> weights) {
  if (dists.empty()) throw std::invalid_argument("loss over an empty valid set");
  if (targets.size() != dists.size() || weights.size() != dists.size())
    throw std::invalid_argument("loss: targets/weights misaligned with distributions");
  double sum = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const int t = targets[i];
    if (t < 0 || t >= kNumActions) throw std::invalid_argument("loss: target outside the action set");
    sum += weights[i] * -std::log(std::max(dists[i].probs[t], kLogProbFloor));
  }
  return sum / static_cast<double>(dists.size());
}

double nll_loss(std::span<const ActionDistribution> dists, std::span<const int> targets) {
  const std::vector<double> ones(dists.size(), 1.0);
  return weighted_nll_loss(dists, targets, ones);
}

}  // namespace uwdt::nn
