#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uwdt/data/windows.hpp"
#include "uwdt/nn/layers.hpp"
#include "uwdt/sim/action.hpp"

namespace uwdt::nn {

enum class ModelMode : std::uint8_t { return_conditioned = 0, bc = 1 };

std::string mode_name(ModelMode m);
ModelMode mode_from_name(const std::string& s);

struct EncoderConfig {
  int in_channels = 4;
  int height = 41;
  int width = 50;
  std::array<int, 3> channels{32, 64, 128};
  int embed = 32;
  double dropout = 0.1;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  // Spatial size after the stride-2, padding-1 conv stack.
  std::array<int, 2> output_hw() const;
  int flat_size() const;
  int grid_values() const { return in_channels * height * width; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  int context = data::kDefaultContext;
  int d_model = 32;
  int layers = 4;
  int heads = 1;
  int max_timestep = 22;
  double return_scale = 22.0;
  ModelMode mode = ModelMode::return_conditioned;

  int tokens_per_step() const { return mode == ModelMode::bc ? 2 : 3; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Closed-form trainable parameter count (buffers excluded).
std::int64_t parameter_count(const ModelConfig& cfg);

// Valid positions of a batch, flattened sequence-major. Grids are quantized
// (channel, row, col) arrays of cfg.encoder.grid_values() entries.
struct TokenInput {
  std::vector<int> lengths;
  std::vector<const std::int8_t*> grids;
  std::vector<float> returns_to_go;
  std::vector<int> prev_actions;
  std::vector<int> timesteps;
  std::vector<int> targets;

  int total() const { return static_cast<int>(prev_actions.size()); }
};

// Throws std::invalid_argument on a malformed window.
TokenInput gather_tokens(const data::Batch& batch);

template <class T>
struct Block {
  RmsNorm<T> norm1;
  Linear<T> query, key, value, out;
  RmsNorm<T> norm2;
  Linear<T> fc1, fc2;
};

template <class T>
struct EncoderCache {
  int n = 0;
  std::array<typename Conv2d<T>::Cache, 3> conv;
  std::array<Mat<T>, 3> pre_relu;
  std::array<typename BatchNorm<T>::Cache, 3> bn;
  std::array<Mat<T>, 3> drop_mask;
  Mat<T> flat;
  bool train = false;
};

template <class T>
struct BlockCache {
  typename RmsNorm<T>::Cache n1, n2;
  Mat<T> h1, q, k, v, mixed, h2, f1, g;
  std::vector<Mat<T>> probs;  // per (sequence, head)
};

template <class T>
struct TransformerCache {
  std::vector<int> lengths;  // timesteps per sequence
  std::vector<float> returns_to_go;
  std::vector<int> prev_actions;
  std::vector<int> timesteps;
  Mat<T> encoded;
  Mat<T> scaled_returns;
  std::vector<Mat<T>> block_inputs;
  std::vector<BlockCache<T>> blocks;
  typename RmsNorm<T>::Cache final_norm;
  Mat<T> readout;
};

template <class T>
struct ForwardCache {
  EncoderCache<T> encoder;
  TransformerCache<T> transformer;
};

template <class T>
class SeqModel {
 public:
  SeqModel() : SeqModel(ModelConfig{}) {}
  explicit SeqModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // Draws every trainable parameter from rng in parameters() order.
  void initialize(Rng& rng);

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  std::vector<Param<T>*> buffers();
  std::vector<const Param<T>*> buffers() const;
  void zero_grad();

  // Grids -> n x encoder.embed. dropout_rng is required when train is true.
  Mat<T> encode(const std::vector<const std::int8_t*>& grids, bool train, Rng* dropout_rng,
                EncoderCache<T>* cache) const;

  // Encoded states plus token metadata -> logits for every valid position.
  Mat<T> forward_encoded(const Mat<T>& encoded, const TokenInput& input, TransformerCache<T>* cache) const;

  Mat<T> forward(const TokenInput& input, bool train, Rng* dropout_rng, ForwardCache<T>* cache) const;

  // Accumulates parameter gradients for dL/dlogits.
  void backward(const Mat<T>& dlogits, const ForwardCache<T>& cache);

  // Folds the batch statistics of a training forward into the running buffers.
  void commit_batch_stats(const ForwardCache<T>& cache);

  template <class U>
  SeqModel<U> cast() const {
    SeqModel<U> out(cfg_);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    auto dbuf = out.buffers();
    auto sbuf = buffers();
    for (std::size_t i = 0; i < sbuf.size(); ++i) dbuf[i]->value = sbuf[i]->value.template cast<U>();
    return out;
  }

 private:
  void encoder_backward(const Mat<T>& d_encoded, const EncoderCache<T>& c);
  Mat<T> block_forward(const Block<T>& b, const Mat<T>& x, const std::vector<int>& token_counts,
                       BlockCache<T>* c) const;
  Mat<T> block_backward(Block<T>& b, const Mat<T>& dy, const std::vector<int>& token_counts,
                        const BlockCache<T>& c);

  ModelConfig cfg_;
  std::array<Conv2d<T>, 3> conv_;
  std::array<BatchNorm<T>, 3> bn_;
  SpatialDropout<T> dropout_;
  Linear<T> enc_fc_;
  Linear<T> embed_return_;
  Linear<T> embed_state_;
  Embedding<T> embed_action_;
  Embedding<T> embed_timestep_;
  std::vector<Block<T>> blocks_;
  RmsNorm<T> norm_final_;
  Linear<T> head_;
};

extern template class SeqModel<float>;
extern template class SeqModel<double>;

struct ActionDistribution {
  std::array<double, kNumActions> logits{};
  std::array<double, kNumActions> probs{};
};

ActionDistribution softmax_distribution(std::span<const double> logits);

template <class T>
ActionDistribution distribution_row(const Mat<T>& logits, Eigen::Index row) {
  std::array<double, kNumActions> l{};
  for (int a = 0; a < kNumActions; ++a) l[a] = static_cast<double>(logits(row, a));
  return softmax_distribution(l);
}

}  // namespace uwdt::nn
