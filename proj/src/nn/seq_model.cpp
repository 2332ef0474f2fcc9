#include "uwdt/nn/seq_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace uwdt::nn {

std::string mode_name(ModelMode m) { return m == ModelMode::bc ? "bc" : "return_conditioned"; }

ModelMode mode_from_name(const std::string& s) {
  if (s == "bc") return ModelMode::bc;
  if (s == "return_conditioned" || s == "dt") return ModelMode::return_conditioned;
  throw std::invalid_argument("unknown model mode: " + s);
}

std::array<int, 2> EncoderConfig::output_hw() const {
  int h = height;
  int w = width;
  for (int i = 0; i < 3; ++i) {
    h = (h + 2 - 3) / 2 + 1;
    w = (w + 2 - 3) / 2 + 1;
  }
  return {h, w};
}

int EncoderConfig::flat_size() const {
  const auto hw = output_hw();
  return hw[0] * hw[1] * channels[2];
}

void EncoderConfig::validate() const {
  if (in_channels <= 0 || height < 2 || width < 2 || embed <= 0) throw std::invalid_argument("encoder dims must be positive");
  for (int c : channels) {
    if (c <= 0) throw std::invalid_argument("encoder channels must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("encoder dropout must be in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0) || !(bn_eps > 0.0)) throw std::invalid_argument("bad batch-norm settings");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (context <= 0 || d_model <= 0 || layers <= 0 || heads <= 0 || max_timestep <= 0)
    throw std::invalid_argument("model dims must be positive");
  if (d_model % heads != 0) throw std::invalid_argument("heads must divide d_model");
  if (!(return_scale > 0.0)) throw std::invalid_argument("return_scale must be positive");
}

std::int64_t parameter_count(const ModelConfig& cfg) {
  const std::int64_t d = cfg.d_model;
  std::int64_t n = 0;
  int cin = cfg.encoder.in_channels;
  for (int c : cfg.encoder.channels) {
    n += 9LL * cin * c + c;  // conv
    n += 2LL * c;            // batch-norm affine
    cin = c;
  }
  n += static_cast<std::int64_t>(cfg.encoder.flat_size()) * cfg.encoder.embed + cfg.encoder.embed;
  if (cfg.mode == ModelMode::return_conditioned) n += 2 * d;
  n += cfg.encoder.embed * d + d;
  n += (kNumActions + 1) * d;
  n += cfg.max_timestep * d;
  const std::int64_t block = 2 * d + 4 * (d * d + d) + (d * 4 * d + 4 * d) + (4 * d * d + d);
  n += cfg.layers * block;
  n += d;
  n += d * kNumActions + kNumActions;
  return n;
}

TokenInput gather_tokens(const data::Batch& batch) {
  TokenInput in;
  for (const auto* w : batch.windows) {
    if (w == nullptr) throw std::invalid_argument("null window in batch");
    data::validate_window(*w);
    const int first = w->first_valid();
    in.lengths.push_back(w->context - first);
    for (int k = first; k < w->context; ++k) {
      in.grids.push_back(w->states[k]);
      in.returns_to_go.push_back(w->returns_to_go[k]);
      in.prev_actions.push_back(w->prev_actions[k]);
      in.timesteps.push_back(w->timesteps[k]);
      in.targets.push_back(w->targets[k]);
    }
  }
  if (static_cast<int>(in.prev_actions.size()) != batch.token_count())
    throw std::invalid_argument("batch valid set does not match window masks");
  return in;
}

ActionDistribution softmax_distribution(std::span<const double> logits) {
  if (logits.size() != kNumActions) throw std::invalid_argument("expected one logit per action");
  ActionDistribution d;
  double mx = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    d.logits[a] = logits[a];
    mx = std::max(mx, logits[a]);
  }
  double z = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    d.probs[a] = std::exp(logits[a] - mx);
    z += d.probs[a];
  }
  for (auto& p : d.probs) p /= z;
  return d;
}

template <class T>
SeqModel<T>::SeqModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto& e = cfg_.encoder;
  int cin = e.in_channels;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "encoder.conv" + std::to_string(i + 1);
    conv_[i].setup(name, cin, e.channels[i]);
    bn_[i].setup("encoder.bn" + std::to_string(i + 1), e.channels[i], e.bn_momentum, e.bn_eps);
    cin = e.channels[i];
  }
  dropout_.rate = e.dropout;
  enc_fc_.setup("encoder.fc", e.flat_size(), e.embed);
  const int d = cfg_.d_model;
  if (cfg_.mode == ModelMode::return_conditioned) embed_return_.setup("embed.return", 1, d);
  embed_state_.setup("embed.state", e.embed, d);
  embed_action_.setup("embed.action", kNumActions + 1, d);
  embed_timestep_.setup("embed.timestep", cfg_.max_timestep, d);
  blocks_.resize(cfg_.layers);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "blocks." + std::to_string(l);
    auto& b = blocks_[l];
    b.norm1.setup(p + ".norm1", d);
    b.query.setup(p + ".attn.query", d, d);
    b.key.setup(p + ".attn.key", d, d);
    b.value.setup(p + ".attn.value", d, d);
    b.out.setup(p + ".attn.out", d, d);
    b.norm2.setup(p + ".norm2", d);
    b.fc1.setup(p + ".mlp.fc1", d, 4 * d);
    b.fc2.setup(p + ".mlp.fc2", 4 * d, d);
  }
  norm_final_.setup("norm_final", d);
  head_.setup("head", d, kNumActions);
}

template <class T>
std::vector<Param<T>*> SeqModel<T>::parameters() {
  std::vector<Param<T>*> ps;
  for (int i = 0; i < 3; ++i) {
    ps.push_back(&conv_[i].weight);
    ps.push_back(&conv_[i].bias);
    ps.push_back(&bn_[i].gamma);
    ps.push_back(&bn_[i].beta);
  }
  ps.push_back(&enc_fc_.weight);
  ps.push_back(&enc_fc_.bias);
  if (cfg_.mode == ModelMode::return_conditioned) {
    ps.push_back(&embed_return_.weight);
    ps.push_back(&embed_return_.bias);
  }
  ps.push_back(&embed_state_.weight);
  ps.push_back(&embed_state_.bias);
  ps.push_back(&embed_action_.table);
  ps.push_back(&embed_timestep_.table);
  for (auto& b : blocks_) {
    ps.push_back(&b.norm1.gain);
    for (Linear<T>* l : {&b.query, &b.key, &b.value, &b.out}) {
      ps.push_back(&l->weight);
      ps.push_back(&l->bias);
    }
    ps.push_back(&b.norm2.gain);
    for (Linear<T>* l : {&b.fc1, &b.fc2}) {
      ps.push_back(&l->weight);
      ps.push_back(&l->bias);
    }
  }
  ps.push_back(&norm_final_.gain);
  ps.push_back(&head_.weight);
  ps.push_back(&head_.bias);
  return ps;
}

template <class T>
std::vector<const Param<T>*> SeqModel<T>::parameters() const {
  auto ps = const_cast<SeqModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

template <class T>
std::vector<Param<T>*> SeqModel<T>::buffers() {
  std::vector<Param<T>*> bs;
  for (auto& bn : bn_) {
    bs.push_back(&bn.running_mean);
    bs.push_back(&bn.running_var);
  }
  return bs;
}

template <class T>
std::vector<const Param<T>*> SeqModel<T>::buffers() const {
  auto bs = const_cast<SeqModel*>(this)->buffers();
  return {bs.begin(), bs.end()};
}

template <class T>
void SeqModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <class T>
void SeqModel<T>::initialize(Rng& rng) {
  constexpr double kTransformerSd = 0.02;
  for (int i = 0; i < 3; ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(conv_[i].weight.value.rows()));
    init_uniform(conv_[i].weight, bound, rng);
    init_uniform(conv_[i].bias, bound, rng);
    bn_[i].gamma.value.setOnes();
    bn_[i].beta.value.setZero();
    bn_[i].running_mean.value.setZero();
    bn_[i].running_var.value.setOnes();
  }
  const double fc_bound = 1.0 / std::sqrt(static_cast<double>(enc_fc_.in_features()));
  init_uniform(enc_fc_.weight, fc_bound, rng);
  init_uniform(enc_fc_.bias, fc_bound, rng);
  auto normal_linear = [&](Linear<T>& l) {
    init_normal(l.weight, kTransformerSd, rng);
    l.bias.value.setZero();
  };
  if (cfg_.mode == ModelMode::return_conditioned) normal_linear(embed_return_);
  normal_linear(embed_state_);
  init_normal(embed_action_.table, kTransformerSd, rng);
  init_normal(embed_timestep_.table, kTransformerSd, rng);
  for (auto& b : blocks_) {
    b.norm1.gain.value.setOnes();
    b.norm2.gain.value.setOnes();
    for (Linear<T>* l : {&b.query, &b.key, &b.value, &b.out, &b.fc1, &b.fc2}) normal_linear(*l);
  }
  norm_final_.gain.value.setOnes();
  normal_linear(head_);
}

template <class T>
Mat<T> SeqModel<T>::encode(const std::vector<const std::int8_t*>& grids, bool train, Rng* dropout_rng,
                           EncoderCache<T>* cache) const {
  const auto& e = cfg_.encoder;
  if (train && dropout_rng == nullptr && e.dropout > 0.0) throw std::invalid_argument("training encode needs a dropout rng");
  const int n = static_cast<int>(grids.size());
  if (n == 0) throw std::invalid_argument("encode: no grids");
  const int hw = e.height * e.width;
  Mat<T> x(static_cast<Eigen::Index>(n) * hw, e.in_channels);
  for (int img = 0; img < n; ++img) {
    const std::int8_t* g = grids[img];
    if (g == nullptr) throw std::invalid_argument("encode: null grid");
    for (int c = 0; c < e.in_channels; ++c) {
      for (int p = 0; p < hw; ++p) {
        x(static_cast<Eigen::Index>(img) * hw + p, c) = static_cast<T>(data::dequantize_value(g[c * hw + p]));
      }
    }
  }
  EncoderCache<T> local;
  EncoderCache<T>& c = cache != nullptr ? *cache : local;
  c.n = n;
  c.train = train;
  int h = e.height;
  int w = e.width;
  for (int i = 0; i < 3; ++i) {
    Mat<T> y = conv_[i].forward(x, n, h, w, c.conv[i]);
    h = c.conv[i].ho;
    w = c.conv[i].wo;
    if (cache != nullptr) c.pre_relu[i] = y;
    y = y.cwiseMax(T(0));
    y = bn_[i].forward(y, train, c.bn[i]);
    if (train && e.dropout > 0.0) y = dropout_.forward(y, n, h * w, *dropout_rng, c.drop_mask[i]);
    x = std::move(y);
  }
  // NHWC rows of one image are contiguous, so the flatten is a reshape.
  Eigen::Map<Mat<T>> flat(x.data(), n, static_cast<Eigen::Index>(h) * w * e.channels[2]);
  if (cache != nullptr) c.flat = flat;
  return enc_fc_.forward(flat);
}

template <class T>
void SeqModel<T>::encoder_backward(const Mat<T>& d_encoded, const EncoderCache<T>& c) {
  const auto& e = cfg_.encoder;
  Mat<T> dflat = enc_fc_.backward(c.flat, d_encoded);
  const int last_pixels = c.conv[2].ho * c.conv[2].wo;
  Mat<T> dx = Eigen::Map<Mat<T>>(dflat.data(), static_cast<Eigen::Index>(c.n) * last_pixels, e.channels[2]);
  for (int i = 2; i >= 0; --i) {
    const int pixels = c.conv[i].ho * c.conv[i].wo;
    if (c.train && e.dropout > 0.0) dx = SpatialDropout<T>::backward(dx, c.n, pixels, c.drop_mask[i]);
    dx = bn_[i].backward(dx, c.bn[i]);
    dx = (c.pre_relu[i].array() > T(0)).select(dx, T(0));
    dx = conv_[i].backward(dx, c.conv[i], i > 0);
  }
}

template <class T>
Mat<T> SeqModel<T>::block_forward(const Block<T>& b, const Mat<T>& x, const std::vector<int>& token_counts,
                                  BlockCache<T>* cache) const {
  BlockCache<T> local;
  BlockCache<T>& c = cache != nullptr ? *cache : local;
  const int d = cfg_.d_model;
  const int heads = cfg_.heads;
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  c.h1 = b.norm1.forward(x, c.n1);
  c.q = b.query.forward(c.h1);
  c.k = b.key.forward(c.h1);
  c.v = b.value.forward(c.h1);
  c.mixed.setZero(x.rows(), d);
  c.probs.clear();
  Eigen::Index off = 0;
  for (int n : token_counts) {
    for (int hd = 0; hd < heads; ++hd) {
      const auto q = c.q.block(off, hd * dh, n, dh);
      const auto k = c.k.block(off, hd * dh, n, dh);
      const auto v = c.v.block(off, hd * dh, n, dh);
      Mat<T> s = (q * k.transpose()) * scale;
      Mat<T> p = Mat<T>::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        const T mx = s.row(i).head(i + 1).maxCoeff();
        T z = 0;
        for (int j = 0; j <= i; ++j) {
          p(i, j) = std::exp(s(i, j) - mx);
          z += p(i, j);
        }
        p.row(i).head(i + 1) /= z;
      }
      c.mixed.block(off, hd * dh, n, dh) = p * v;
      c.probs.push_back(std::move(p));
    }
    off += n;
  }
  Mat<T> x1 = x + b.out.forward(c.mixed);
  c.h2 = b.norm2.forward(x1, c.n2);
  c.f1 = b.fc1.forward(c.h2);
  c.g = gelu_forward(c.f1);
  return x1 + b.fc2.forward(c.g);
}

template <class T>
Mat<T> SeqModel<T>::block_backward(Block<T>& b, const Mat<T>& dy, const std::vector<int>& token_counts,
                                   const BlockCache<T>& c) {
  const int d = cfg_.d_model;
  const int heads = cfg_.heads;
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  // MLP branch.
  Mat<T> dg = b.fc2.backward(c.g, dy);
  Mat<T> df1 = gelu_backward(c.f1, dg);
  Mat<T> dh2 = b.fc1.backward(c.h2, df1);
  Mat<T> dx1 = dy + b.norm2.backward(dh2, c.n2);
  // Attention branch.
  Mat<T> dmixed = b.out.backward(c.mixed, dx1);
  Mat<T> dq = Mat<T>::Zero(dy.rows(), d);
  Mat<T> dk = Mat<T>::Zero(dy.rows(), d);
  Mat<T> dv = Mat<T>::Zero(dy.rows(), d);
  Eigen::Index off = 0;
  std::size_t pi = 0;
  for (int n : token_counts) {
    for (int hd = 0; hd < heads; ++hd, ++pi) {
      const Mat<T>& p = c.probs[pi];
      const auto q = c.q.block(off, hd * dh, n, dh);
      const auto k = c.k.block(off, hd * dh, n, dh);
      const auto v = c.v.block(off, hd * dh, n, dh);
      const auto dout = dmixed.block(off, hd * dh, n, dh);
      Mat<T> dp = dout * v.transpose();
      dv.block(off, hd * dh, n, dh) = p.transpose() * dout;
      const auto row_dot = (dp.array() * p.array()).rowwise().sum();
      Mat<T> ds = (p.array() * (dp.array().colwise() - row_dot)).matrix() * scale;
      dq.block(off, hd * dh, n, dh) = ds * k;
      dk.block(off, hd * dh, n, dh) = ds.transpose() * q;
    }
    off += n;
  }
  Mat<T> dh1 = b.query.backward(c.h1, dq);
  dh1 += b.key.backward(c.h1, dk);
  dh1 += b.value.backward(c.h1, dv);
  return dx1 + b.norm1.backward(dh1, c.n1);
}

template <class T>
Mat<T> SeqModel<T>::forward_encoded(const Mat<T>& encoded, const TokenInput& in, TransformerCache<T>* cache) const {
  const int n = in.total();
  if (n == 0) throw std::invalid_argument("forward: empty input");
  if (encoded.rows() != n || encoded.cols() != cfg_.encoder.embed) throw std::invalid_argument("forward: encoded shape mismatch");
  if (in.returns_to_go.size() != static_cast<std::size_t>(n) || in.timesteps.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("forward: ragged token input");
  int sum = 0;
  for (int len : in.lengths) {
    if (len <= 0 || len > cfg_.context) throw std::invalid_argument("forward: sequence length outside [1, context]");
    sum += len;
  }
  if (sum != n) throw std::invalid_argument("forward: lengths do not cover the input");
  for (int i = 0; i < n; ++i) {
    if (in.prev_actions[i] < 0 || in.prev_actions[i] > kNumActions) throw std::invalid_argument("forward: bad action id");
    if (in.timesteps[i] < 0 || in.timesteps[i] >= cfg_.max_timestep) throw std::invalid_argument("forward: bad timestep");
  }

  TransformerCache<T> local;
  TransformerCache<T>& c = cache != nullptr ? *cache : local;
  const int g = cfg_.tokens_per_step();
  const int d = cfg_.d_model;
  const bool with_returns = cfg_.mode == ModelMode::return_conditioned;

  const Mat<T> state_tokens = embed_state_.forward(encoded);
  Mat<T> return_tokens;
  if (with_returns) {
    c.scaled_returns.resize(n, 1);
    for (int i = 0; i < n; ++i) c.scaled_returns(i, 0) = static_cast<T>(in.returns_to_go[i] / cfg_.return_scale);
    return_tokens = embed_return_.forward(c.scaled_returns);
  }
  Mat<T> x = Mat<T>::Zero(static_cast<Eigen::Index>(n) * g, d);
  std::vector<int> token_counts;
  token_counts.reserve(in.lengths.size());
  for (int len : in.lengths) token_counts.push_back(len * g);
  for (int i = 0; i < n; ++i) {
    const Eigen::Index base = static_cast<Eigen::Index>(i) * g;
    if (with_returns) x.row(base) = return_tokens.row(i);
    x.row(base + g - 2) = state_tokens.row(i);
    x.row(base + g - 1) = embed_action_.table.value.row(in.prev_actions[i]);
    for (int j = 0; j < g; ++j) x.row(base + j) += embed_timestep_.table.value.row(in.timesteps[i]);
  }
  if (cache != nullptr) {
    c.lengths = in.lengths;
    c.returns_to_go = in.returns_to_go;
    c.prev_actions = in.prev_actions;
    c.timesteps = in.timesteps;
    c.encoded = encoded;
    c.block_inputs.resize(blocks_.size());
    c.blocks.resize(blocks_.size());
  }
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    if (cache != nullptr) c.block_inputs[l] = x;
    x = block_forward(blocks_[l], x, token_counts, cache != nullptr ? &c.blocks[l] : nullptr);
  }
  Mat<T> readin(n, d);
  for (int i = 0; i < n; ++i) readin.row(i) = x.row(static_cast<Eigen::Index>(i) * g + g - 1);
  Mat<T> h = norm_final_.forward(readin, c.final_norm);
  if (cache != nullptr) c.readout = h;
  return head_.forward(h);
}

template <class T>
Mat<T> SeqModel<T>::forward(const TokenInput& in, bool train, Rng* dropout_rng, ForwardCache<T>* cache) const {
  Mat<T> enc = encode(in.grids, train, dropout_rng, cache != nullptr ? &cache->encoder : nullptr);
  return forward_encoded(enc, in, cache != nullptr ? &cache->transformer : nullptr);
}

template <class T>
void SeqModel<T>::backward(const Mat<T>& dlogits, const ForwardCache<T>& cache) {
  const auto& c = cache.transformer;
  const int n = static_cast<int>(c.prev_actions.size());
  const int g = cfg_.tokens_per_step();
  const int d = cfg_.d_model;
  const bool with_returns = cfg_.mode == ModelMode::return_conditioned;
  std::vector<int> token_counts;
  for (int len : c.lengths) token_counts.push_back(len * g);

  Mat<T> dh = head_.backward(c.readout, dlogits);
  Mat<T> dreadin = norm_final_.backward(dh, c.final_norm);
  Mat<T> dx = Mat<T>::Zero(static_cast<Eigen::Index>(n) * g, d);
  for (int i = 0; i < n; ++i) dx.row(static_cast<Eigen::Index>(i) * g + g - 1) = dreadin.row(i);
  for (std::size_t l = blocks_.size(); l-- > 0;) dx = block_backward(blocks_[l], dx, token_counts, c.blocks[l]);

  Mat<T> dstate(n, d);
  Mat<T> dreturn;
  if (with_returns) dreturn.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const Eigen::Index base = static_cast<Eigen::Index>(i) * g;
    RowVec<T> dt = RowVec<T>::Zero(d);
    for (int j = 0; j < g; ++j) dt += dx.row(base + j);
    embed_timestep_.accumulate(c.timesteps[i], dt);
    embed_action_.accumulate(c.prev_actions[i], dx.row(base + g - 1));
    dstate.row(i) = dx.row(base + g - 2);
    if (with_returns) dreturn.row(i) = dx.row(base);
  }
  if (with_returns) embed_return_.backward(c.scaled_returns, dreturn, false);
  Mat<T> denc = embed_state_.backward(c.encoded, dstate);
  encoder_backward(denc, cache.encoder);
}

template <class T>
void SeqModel<T>::commit_batch_stats(const ForwardCache<T>& cache) {
  if (!cache.encoder.train) return;
  for (int i = 0; i < 3; ++i) bn_[i].update_running(cache.encoder.bn[i]);
}

template class SeqModel<float>;
template class SeqModel<double>;

}  // namespace uwdt::nn
