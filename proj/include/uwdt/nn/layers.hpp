#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "uwdt/common/rng.hpp"

namespace uwdt::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <class T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value.setZero(rows, cols);
    grad.setZero(rows, cols);
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

template <class T>
void init_normal(Param<T>& p, double sd, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(rng.normal(0.0, sd));
}

template <class T>
void init_uniform(Param<T>& p, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// y = x W + b, with W stored (in x out).
template <class T>
struct Linear {
  Param<T> weight;
  Param<T> bias;

  void setup(const std::string& name, int in, int out) {
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(in, out);
    bias.resize(1, out);
  }
  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }

  Mat<T> forward(const Mat<T>& x) const {
    Mat<T> y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }
  // Accumulates parameter gradients; returns dL/dx unless need_input_grad is false.
  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy, bool need_input_grad = true) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    if (!need_input_grad) return {};
    return dy * weight.value.transpose();
  }
};

template <class T>
struct Embedding {
  Param<T> table;

  void setup(const std::string& name, int count, int dim) {
    table.name = name + ".weight";
    table.resize(count, dim);
  }
  void lookup(int id, Eigen::Ref<RowVec<T>> out) const { out += table.value.row(id); }
  void accumulate(int id, const Eigen::Ref<const RowVec<T>>& grad) { table.grad.row(id) += grad; }
};

// 3x3 convolution over NHWC activations laid out as (n*h*w) x c matrices.
// Weight rows are indexed (ky*3 + kx)*cin + c.
template <class T>
struct Conv2d {
  static constexpr int kKernel = 3;
  int cin = 0;
  int cout = 0;
  int stride = 2;
  int pad = 1;
  Param<T> weight;
  Param<T> bias;

  struct Cache {
    Mat<T> cols;
    int n = 0, h = 0, w = 0, ho = 0, wo = 0;
  };

  void setup(const std::string& name, int in, int out) {
    cin = in;
    cout = out;
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(kKernel * kKernel * in, out);
    bias.resize(1, out);
  }
  int out_size(int s) const { return (s + 2 * pad - kKernel) / stride + 1; }

  Mat<T> forward(const Mat<T>& x, int n, int h, int w, Cache& c) const {
    c.n = n;
    c.h = h;
    c.w = w;
    c.ho = out_size(h);
    c.wo = out_size(w);
    const Eigen::Index rows = static_cast<Eigen::Index>(n) * c.ho * c.wo;
    c.cols.setZero(rows, kKernel * kKernel * cin);
    for (int img = 0; img < n; ++img) {
      for (int oy = 0; oy < c.ho; ++oy) {
        for (int ox = 0; ox < c.wo; ++ox) {
          T* dst = c.cols.row((static_cast<Eigen::Index>(img) * c.ho + oy) * c.wo + ox).data();
          for (int ky = 0; ky < kKernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              const T* src = x.row((static_cast<Eigen::Index>(img) * h + iy) * w + ix).data();
              std::copy(src, src + cin, dst + (ky * kKernel + kx) * cin);
            }
          }
        }
      }
    }
    Mat<T> y = c.cols * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& c, bool need_input_grad) {
    weight.grad.noalias() += c.cols.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    if (!need_input_grad) return {};
    const Mat<T> dcols = dy * weight.value.transpose();
    Mat<T> dx = Mat<T>::Zero(static_cast<Eigen::Index>(c.n) * c.h * c.w, cin);
    for (int img = 0; img < c.n; ++img) {
      for (int oy = 0; oy < c.ho; ++oy) {
        for (int ox = 0; ox < c.wo; ++ox) {
          const T* src = dcols.row((static_cast<Eigen::Index>(img) * c.ho + oy) * c.wo + ox).data();
          for (int ky = 0; ky < kKernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= c.h) continue;
            for (int kx = 0; kx < kKernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= c.w) continue;
              T* dst = dx.row((static_cast<Eigen::Index>(img) * c.h + iy) * c.w + ix).data();
              const T* s = src + (ky * kKernel + kx) * cin;
              for (int ch = 0; ch < cin; ++ch) dst[ch] += s[ch];
            }
          }
        }
      }
    }
    return dx;
  }
};

// Per-channel normalization over all rows. Running variance tracks the
// unbiased batch variance; normalization uses the biased one.
template <class T>
struct BatchNorm {
  Param<T> gamma;
  Param<T> beta;
  Param<T> running_mean;  // buffer
  Param<T> running_var;   // buffer
  double momentum = 0.1;
  double eps = 1e-5;

  struct Cache {
    Mat<T> xhat;
    RowVec<T> inv_std;
    RowVec<T> batch_mean;
    RowVec<T> batch_var;  // unbiased
    bool train = false;
  };

  void setup(const std::string& name, int channels, double mom, double epsilon) {
    momentum = mom;
    eps = epsilon;
    gamma.name = name + ".weight";
    beta.name = name + ".bias";
    running_mean.name = name + ".running_mean";
    running_var.name = name + ".running_var";
    gamma.resize(1, channels);
    gamma.value.setOnes();
    beta.resize(1, channels);
    running_mean.resize(1, channels);
    running_var.resize(1, channels);
    running_var.value.setOnes();
  }

  Mat<T> forward(const Mat<T>& x, bool train, Cache& c) const {
    const Eigen::Index n = x.rows();
    const Eigen::Index ch = x.cols();
    c.train = train;
    RowVec<T> mean(ch);
    RowVec<T> var(ch);
    if (train) {
      std::vector<double> sum(ch, 0.0);
      for (Eigen::Index r = 0; r < n; ++r) {
        const T* row = x.row(r).data();
        for (Eigen::Index j = 0; j < ch; ++j) sum[j] += row[j];
      }
      for (Eigen::Index j = 0; j < ch; ++j) mean[j] = static_cast<T>(sum[j] / static_cast<double>(n));
      std::fill(sum.begin(), sum.end(), 0.0);
      for (Eigen::Index r = 0; r < n; ++r) {
        const T* row = x.row(r).data();
        for (Eigen::Index j = 0; j < ch; ++j) {
          const double dv = static_cast<double>(row[j] - mean[j]);
          sum[j] += dv * dv;
        }
      }
      c.batch_mean = mean;
      c.batch_var.resize(ch);
      for (Eigen::Index j = 0; j < ch; ++j) {
        var[j] = static_cast<T>(sum[j] / static_cast<double>(n));
        c.batch_var[j] = static_cast<T>(sum[j] / static_cast<double>(n > 1 ? n - 1 : 1));
      }
    } else {
      mean = running_mean.value.row(0);
      var = running_var.value.row(0);
    }
    c.inv_std = (var.array() + static_cast<T>(eps)).rsqrt().matrix();
    c.xhat.resize(n, ch);
    Mat<T> y(n, ch);
    const T* g = gamma.value.data();
    const T* b = beta.value.data();
    for (Eigen::Index r = 0; r < n; ++r) {
      const T* xr = x.row(r).data();
      T* hr = c.xhat.row(r).data();
      T* yr = y.row(r).data();
      for (Eigen::Index j = 0; j < ch; ++j) {
        hr[j] = (xr[j] - mean[j]) * c.inv_std[j];
        yr[j] = hr[j] * g[j] + b[j];
      }
    }
    return y;
  }

  void update_running(const Cache& c) {
    const T m = static_cast<T>(momentum);
    running_mean.value.row(0) = (T(1) - m) * running_mean.value.row(0) + m * c.batch_mean;
    running_var.value.row(0) = (T(1) - m) * running_var.value.row(0) + m * c.batch_var;
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& c) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index ch = dy.cols();
    const T* g = gamma.value.data();
    std::vector<double> sum_dy(ch, 0.0);
    std::vector<double> sum_dy_xhat(ch, 0.0);
    for (Eigen::Index r = 0; r < n; ++r) {
      const T* d = dy.row(r).data();
      const T* h = c.xhat.row(r).data();
      for (Eigen::Index j = 0; j < ch; ++j) {
        sum_dy[j] += d[j];
        sum_dy_xhat[j] += static_cast<double>(d[j]) * h[j];
      }
    }
    for (Eigen::Index j = 0; j < ch; ++j) {
      gamma.grad(0, j) += static_cast<T>(sum_dy_xhat[j]);
      beta.grad(0, j) += static_cast<T>(sum_dy[j]);
    }
    Mat<T> dx(n, ch);
    if (!c.train) {
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index j = 0; j < ch; ++j) dx(r, j) = dy(r, j) * g[j] * c.inv_std[j];
      }
      return dx;
    }
    // dx = g * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
    RowVec<T> a(ch), m1(ch), m2(ch);
    for (Eigen::Index j = 0; j < ch; ++j) {
      a[j] = g[j] * c.inv_std[j];
      m1[j] = static_cast<T>(sum_dy[j] / static_cast<double>(n));
      m2[j] = static_cast<T>(sum_dy_xhat[j] / static_cast<double>(n));
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      const T* d = dy.row(r).data();
      const T* h = c.xhat.row(r).data();
      T* o = dx.row(r).data();
      for (Eigen::Index j = 0; j < ch; ++j) o[j] = a[j] * (d[j] - m1[j] - h[j] * m2[j]);
    }
    return dx;
  }
};

// Zeroes whole feature maps with probability p and rescales survivors.
template <class T>
struct SpatialDropout {
  double rate = 0.1;

  // mask is n x channels, holding 0 or 1/(1-p).
  Mat<T> forward(const Mat<T>& x, int n, int pixels, Rng& rng, Mat<T>& mask) const {
    const Eigen::Index ch = x.cols();
    mask.resize(n, ch);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? T(0) : keep_scale;
    Mat<T> y = x;
    for (int img = 0; img < n; ++img) {
      y.middleRows(static_cast<Eigen::Index>(img) * pixels, pixels).array().rowwise() *= mask.row(img).array();
    }
    return y;
  }
  static Mat<T> backward(const Mat<T>& dy, int n, int pixels, const Mat<T>& mask) {
    Mat<T> dx = dy;
    for (int img = 0; img < n; ++img) {
      dx.middleRows(static_cast<Eigen::Index>(img) * pixels, pixels).array().rowwise() *= mask.row(img).array();
    }
    return dx;
  }
};

template <class T>
struct RmsNorm {
  Param<T> gain;
  double eps = 1e-5;

  struct Cache {
    Mat<T> x;
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_rms;
  };

  void setup(const std::string& name, int dim) {
    gain.name = name + ".weight";
    gain.resize(1, dim);
    gain.value.setOnes();
  }

  Mat<T> forward(const Mat<T>& x, Cache& c) const {
    c.x = x;
    c.inv_rms = ((x.array().square().rowwise().sum() / static_cast<T>(x.cols())) + static_cast<T>(eps)).rsqrt();
    return ((x.array().colwise() * c.inv_rms.array()).rowwise() * gain.value.row(0).array()).matrix();
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& c) {
    gain.grad.row(0) += (dy.array() * (c.x.array().colwise() * c.inv_rms.array())).colwise().sum().matrix();
    const Mat<T> g = (dy.array().rowwise() * gain.value.row(0).array()).matrix();
    const auto dot = (g.array() * c.x.array()).rowwise().sum();
    const auto r3 = c.inv_rms.array().cube() / static_cast<T>(c.x.cols());
    Mat<T> dx = (g.array().colwise() * c.inv_rms.array()).matrix();
    dx.array() -= c.x.array().colwise() * (dot * r3);
    return dx;
  }
};

template <class T>
inline Mat<T> gelu_forward(const Mat<T>& x) {
  const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return x.unaryExpr([k](T v) { return T(0.5) * v * (T(1) + std::tanh(k * (v + T(0.044715) * v * v * v))); });
}

template <class T>
inline Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy) {
  const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const Mat<T> d = x.unaryExpr([k](T v) {
    const T t = std::tanh(k * (v + T(0.044715) * v * v * v));
    return T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * k * (T(1) + T(3 * 0.044715) * v * v);
  });
  return (d.array() * dy.array()).matrix();
}

}  // namespace uwdt::nn
