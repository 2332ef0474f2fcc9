#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <json.hpp>

#include "uwdt/nn/seq_model.hpp"

namespace uwdt::weighting {

inline const double kMaxEntropy = std::log(static_cast<double>(kNumActions));

// Shannon entropy in nats; 0 log 0 = 0.
double entropy(std::span<const double> probs);
inline double entropy(const nn::ActionDistribution& d) { return entropy(d.probs); }

// beta = ln r / ln(h_max / h_min). Throws std::invalid_argument unless
// r > 1 and 0 < h_min < h_max.
double compute_beta(double r, double h_min, double h_max);

// H^beta. Throws std::invalid_argument for H < 0 or beta < 0.
double raw_weight(double h, double beta);

// w / mean(w). Throws std::invalid_argument on empty input or a non-positive entry.
std::vector<double> normalize_weights(std::span<const double> raw);

// min(w, w_max). Throws std::invalid_argument unless w_max > 0.
std::vector<double> clip_weights(std::span<const double> w, double w_max);

struct WeightSchedule {
  double r = 1.3;
  double w_max = 1.5;
  double h_min = 0.0;
  double h_max = 0.0;
  double beta = 0.0;
  int n_episodes = 0;
  std::vector<std::uint64_t> seeds;

  // Fills beta from the entropy range. Throws std::invalid_argument on a
  // degenerate range or bad r / w_max.
  static WeightSchedule build(double r, double w_max, double h_min, double h_max);
  void validate() const;

  nlohmann::json to_json() const;
  static WeightSchedule from_json(const nlohmann::json& j);
};

struct BatchWeights {
  std::vector<double> entropies;   // as measured
  std::vector<double> raw;         // H clamped to [h_min, h_max], then ^beta
  std::vector<double> normalized;  // pre-clip
  std::vector<double> weights;     // post-clip
};

// Per-batch weight pipeline: clamp, power map, batch-mean normalization,
// ceiling. Equal raw weights give exactly 1 everywhere.
BatchWeights batch_weights(std::span<const double> entropies, const WeightSchedule& schedule);

}  // namespace uwdt::weighting
