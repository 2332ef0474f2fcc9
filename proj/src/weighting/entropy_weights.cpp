#include "uwdt/weighting/entropy_weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uwdt::weighting {

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

double compute_beta(double r, double h_min, double h_max) {
  if (!(r > 1.0)) throw std::invalid_argument("compute_beta: r must exceed 1");
  if (!(h_min > 0.0)) throw std::invalid_argument("compute_beta: h_min must be positive");
  if (!(h_min < h_max)) throw std::invalid_argument("compute_beta: degenerate entropy range (h_min >= h_max)");
  return std::log(r) / std::log(h_max / h_min);
}

double raw_weight(double h, double beta) {
  if (!(h >= 0.0)) throw std::invalid_argument("raw_weight: entropy must be non-negative");
  if (!(beta >= 0.0)) throw std::invalid_argument("raw_weight: beta must be non-negative");
  return std::pow(h, beta);
}

std::vector<double> normalize_weights(std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("normalize_weights: empty batch");
  double sum = 0.0;
  for (double w : raw) {
    if (!(w > 0.0)) throw std::invalid_argument("normalize_weights: weights must be positive");
    sum += w;
  }
  const double mean = sum / static_cast<double>(raw.size());
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / mean;
  return out;
}

std::vector<double> clip_weights(std::span<const double> w, double w_max) {
  if (!(w_max > 0.0)) throw std::invalid_argument("clip_weights: w_max must be positive");
  std::vector<double> out(w.begin(), w.end());
  for (double& x : out) x = std::min(x, w_max);
  return out;
}

WeightSchedule WeightSchedule::build(double r, double w_max, double h_min, double h_max) {
  WeightSchedule s;
  s.r = r;
  s.w_max = w_max;
  s.h_min = h_min;
  s.h_max = h_max;
  s.beta = compute_beta(r, h_min, h_max);
  s.validate();
  return s;
}

void WeightSchedule::validate() const {
  if (!(r > 1.0)) throw std::invalid_argument("schedule: r must exceed 1");
  if (!(w_max >= 1.0)) throw std::invalid_argument("schedule: w_max must be at least 1");
  if (!(h_min > 0.0 && h_min < h_max && h_max <= kMaxEntropy + 1e-12))
    throw std::invalid_argument("schedule: need 0 < h_min < h_max <= ln 5");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("schedule: beta must be positive");
}

nlohmann::json WeightSchedule::to_json() const {
  return {{"r", r}, {"w_max", w_max}, {"h_min", h_min}, {"h_max", h_max},
          {"beta", beta}, {"n_episodes", n_episodes}, {"seeds", seeds}};
}

WeightSchedule WeightSchedule::from_json(const nlohmann::json& j) {
  WeightSchedule s;
  try {
    s.r = j.at("r").get<double>();
    s.w_max = j.at("w_max").get<double>();
    s.h_min = j.at("h_min").get<double>();
    s.h_max = j.at("h_max").get<double>();
    s.beta = j.at("beta").get<double>();
    s.n_episodes = j.value("n_episodes", 0);
    s.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("schedule: ") + ex.what());
  }
  s.validate();
  return s;
}

BatchWeights batch_weights(std::span<const double> entropies, const WeightSchedule& schedule) {
  if (entropies.empty()) throw std::invalid_argument("batch_weights: empty batch");
  BatchWeights b;
  b.entropies.assign(entropies.begin(), entropies.end());
  b.raw.reserve(entropies.size());
  for (double h : entropies) {
    if (!std::isfinite(h)) throw std::invalid_argument("batch_weights: non-finite entropy");
    b.raw.push_back(raw_weight(std::clamp(h, schedule.h_min, schedule.h_max), schedule.beta));
  }
  const bool flat = std::all_of(b.raw.begin(), b.raw.end(), [&](double w) { return w == b.raw.front(); });
  if (flat) {
    b.normalized.assign(b.raw.size(), 1.0);
  } else {
    b.normalized = normalize_weights(b.raw);
  }
  b.weights = clip_weights(b.normalized, schedule.w_max);
  return b;
}

}  // namespace uwdt::weighting
