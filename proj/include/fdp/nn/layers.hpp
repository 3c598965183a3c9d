#pragma once

// Layer primitives with hand-derived backward passes. Activations are
// column-major matrices of shape channels x (batch * length): column
// b * length + t holds every channel of sample b at time t, so convolutions
// become a single GEMM over the whole batch.

#include "fdp/nn/parameter_store.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace fdp::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using ConstMap = Eigen::Map<const Mat<S>>;

template <typename S>
using MutMap = Eigen::Map<Mat<S>>;

template <typename S>
ConstMap<S> as_matrix(const ParameterStore<S>& p, std::size_t idx, Eigen::Index rows, Eigen::Index cols) {
  return ConstMap<S>(p[idx].data.data(), rows, cols);
}

template <typename S>
MutMap<S> as_matrix(ParameterStore<S>& p, std::size_t idx, Eigen::Index rows, Eigen::Index cols) {
  return MutMap<S>(p[idx].data.data(), rows, cols);
}

// ---------------------------------------------------------------------------
// Mish: x * tanh(softplus(x)). With n = e^x, tanh(softplus(x)) = w / (w + 2)
// where w = n (n + 2), which needs a single vectorized exp.

template <typename S>
inline S softplus(S x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, S(0));
}

template <typename S>
Mat<S> mish_forward(const Mat<S>& x) {
  const auto n = x.array().min(S(20)).exp();
  const auto w = (n * (n + S(2))).eval();
  return (x.array() * w / (w + S(2))).matrix();
}

template <typename S>
Mat<S> mish_backward(const Mat<S>& x, const Mat<S>& dy) {
  const auto n = x.array().min(S(20)).exp().eval();
  const auto w = (n * (n + S(2))).eval();
  const auto inv = (S(1) / (w + S(2))).eval();
  const auto t = w * inv;
  const auto dt = S(4) * n * (n + S(1)) * inv * inv;
  return (dy.array() * (t + x.array() * dt)).matrix();
}

// ---------------------------------------------------------------------------

/// Dense layer on column vectors: y = W x + b, W is out x in.
template <typename S>
struct Linear {
  int in = 0;
  int out = 0;
  std::size_t w = 0;
  std::size_t b = 0;

  void declare(ParameterStore<S>& p, const std::string& prefix, int in_features, int out_features) {
    in = in_features;
    out = out_features;
    w = p.add(prefix + ".weight", {out, in});
    b = p.add(prefix + ".bias", {out});
  }

  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x) const {
    Mat<S> y(out, x.cols());
    y.noalias() = as_matrix(p, w, out, in) * x;
    y.colwise() += as_matrix(p, b, out, 1).col(0);
    return y;
  }

  Mat<S> backward(const ParameterStore<S>& p, const Mat<S>& x, const Mat<S>& dy, ParameterStore<S>& g) const {
    as_matrix(g, w, out, in).noalias() += dy * x.transpose();
    as_matrix(g, b, out, 1).col(0) += dy.rowwise().sum();
    Mat<S> dx(in, dy.cols());
    dx.noalias() = as_matrix(p, w, out, in).transpose() * dy;
    return dx;
  }
};

/// 1D convolution. Weight layout is cout x (k * cin) with row index k * cin + ci,
/// matching the im2col buffer.
template <typename S>
struct Conv1d {
  int cin = 0;
  int cout = 0;
  int k = 1;
  int stride = 1;
  int pad = 0;
  std::size_t w = 0;
  std::size_t b = 0;

  void declare(ParameterStore<S>& p, const std::string& prefix, int in_ch, int out_ch, int kernel, int stride_ = 1,
               int pad_ = -1) {
    cin = in_ch;
    cout = out_ch;
    k = kernel;
    stride = stride_;
    pad = pad_ < 0 ? kernel / 2 : pad_;
    w = p.add(prefix + ".weight", {cout, cin, k});
    b = p.add(prefix + ".bias", {cout});
  }

  int out_len(int t_in) const { return (t_in + 2 * pad - k) / stride + 1; }

  Mat<S> im2col(const Mat<S>& x, int batch, int t_in) const {
    const int t_out = out_len(t_in);
    Mat<S> col = Mat<S>::Zero(static_cast<Eigen::Index>(k) * cin, static_cast<Eigen::Index>(batch) * t_out);
    for (int bi = 0; bi < batch; ++bi) {
      for (int t = 0; t < t_out; ++t) {
        for (int kk = 0; kk < k; ++kk) {
          const int src = t * stride - pad + kk;
          if (src < 0 || src >= t_in) continue;
          col.block(static_cast<Eigen::Index>(kk) * cin, static_cast<Eigen::Index>(bi) * t_out + t, cin, 1) =
              x.col(static_cast<Eigen::Index>(bi) * t_in + src);
        }
      }
    }
    return col;
  }

  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_in) const {
    const Mat<S> col = im2col(x, batch, t_in);
    Mat<S> y(cout, col.cols());
    y.noalias() = as_matrix(p, w, cout, static_cast<Eigen::Index>(k) * cin) * col;
    y.colwise() += as_matrix(p, b, cout, 1).col(0);
    return y;
  }

  Mat<S> backward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_in, const Mat<S>& dy,
                  ParameterStore<S>& g) const {
    const int t_out = out_len(t_in);
    const Eigen::Index kc = static_cast<Eigen::Index>(k) * cin;
    {
      const Mat<S> col = im2col(x, batch, t_in);
      as_matrix(g, w, cout, kc).noalias() += dy * col.transpose();
    }
    as_matrix(g, b, cout, 1).col(0) += dy.rowwise().sum();
    Mat<S> dcol(kc, dy.cols());
    dcol.noalias() = as_matrix(p, w, cout, kc).transpose() * dy;
    Mat<S> dx = Mat<S>::Zero(cin, static_cast<Eigen::Index>(batch) * t_in);
    for (int bi = 0; bi < batch; ++bi) {
      for (int t = 0; t < t_out; ++t) {
        for (int kk = 0; kk < k; ++kk) {
          const int src = t * stride - pad + kk;
          if (src < 0 || src >= t_in) continue;
          dx.col(static_cast<Eigen::Index>(bi) * t_in + src) +=
              dcol.block(static_cast<Eigen::Index>(kk) * cin, static_cast<Eigen::Index>(bi) * t_out + t, cin, 1);
        }
      }
    }
    return dx;
  }
};

/// Transposed 1D convolution (kernel k, stride s, padding p):
/// y[t_in * s - p + kk] += W_kk x[t_in]. Weight layout (k * cout) x cin.
template <typename S>
struct ConvTranspose1d {
  int cin = 0;
  int cout = 0;
  int k = 4;
  int stride = 2;
  int pad = 1;
  std::size_t w = 0;
  std::size_t b = 0;

  void declare(ParameterStore<S>& p, const std::string& prefix, int in_ch, int out_ch, int kernel = 4,
               int stride_ = 2, int pad_ = 1) {
    cin = in_ch;
    cout = out_ch;
    k = kernel;
    stride = stride_;
    pad = pad_;
    w = p.add(prefix + ".weight", {cin, cout, k});
    b = p.add(prefix + ".bias", {cout});
  }

  int out_len(int t_in) const { return (t_in - 1) * stride - 2 * pad + k; }

  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_in) const {
    const int t_out = out_len(t_in);
    const Eigen::Index kc = static_cast<Eigen::Index>(k) * cout;
    Mat<S> z(kc, x.cols());
    z.noalias() = as_matrix(p, w, kc, cin) * x;
    Mat<S> y(cout, static_cast<Eigen::Index>(batch) * t_out);
    y.colwise() = as_matrix(p, b, cout, 1).col(0);
    for (int bi = 0; bi < batch; ++bi) {
      for (int t = 0; t < t_in; ++t) {
        for (int kk = 0; kk < k; ++kk) {
          const int dst = t * stride - pad + kk;
          if (dst < 0 || dst >= t_out) continue;
          y.col(static_cast<Eigen::Index>(bi) * t_out + dst) +=
              z.block(static_cast<Eigen::Index>(kk) * cout, static_cast<Eigen::Index>(bi) * t_in + t, cout, 1);
        }
      }
    }
    return y;
  }

  Mat<S> backward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_in, const Mat<S>& dy,
                  ParameterStore<S>& g) const {
    const int t_out = out_len(t_in);
    const Eigen::Index kc = static_cast<Eigen::Index>(k) * cout;
    Mat<S> dz = Mat<S>::Zero(kc, x.cols());
    for (int bi = 0; bi < batch; ++bi) {
      for (int t = 0; t < t_in; ++t) {
        for (int kk = 0; kk < k; ++kk) {
          const int dst = t * stride - pad + kk;
          if (dst < 0 || dst >= t_out) continue;
          dz.block(static_cast<Eigen::Index>(kk) * cout, static_cast<Eigen::Index>(bi) * t_in + t, cout, 1) =
              dy.col(static_cast<Eigen::Index>(bi) * t_out + dst);
        }
      }
    }
    as_matrix(g, w, kc, cin).noalias() += dz * x.transpose();
    as_matrix(g, b, cout, 1).col(0) += dy.rowwise().sum();
    Mat<S> dx(cin, x.cols());
    dx.noalias() = as_matrix(p, w, kc, cin).transpose() * dz;
    return dx;
  }
};

/// Group normalization over (channels in group) x time, per sample.
template <typename S>
struct GroupNorm {
  int channels = 0;
  int groups = 1;
  S eps = S(1e-5);
  std::size_t w = 0;
  std::size_t b = 0;

  struct Cache {
    Mat<S> xhat;
    Mat<S> inv_std;  // groups x batch
  };

  void declare(ParameterStore<S>& p, const std::string& prefix, int ch, int n_groups) {
    if (ch % n_groups != 0) throw InvalidArgument("channels must be divisible by groupnorm groups");
    channels = ch;
    groups = n_groups;
    w = p.add(prefix + ".weight", {ch});
    b = p.add(prefix + ".bias", {ch});
  }

  Mat<S> forward(const ParameterStore<S>& p, const Mat<S>& x, int batch, int t_len, Cache& c) const {
    const int cg = channels / groups;
    const S n = static_cast<S>(cg) * static_cast<S>(t_len);
    c.xhat.resize(x.rows(), x.cols());
    c.inv_std.resize(groups, batch);
    const auto gamma = as_matrix(p, w, channels, 1);
    const auto beta = as_matrix(p, b, channels, 1);
    Mat<S> y(x.rows(), x.cols());
    for (int bi = 0; bi < batch; ++bi) {
      for (int gi = 0; gi < groups; ++gi) {
        const auto blk = x.block(gi * cg, static_cast<Eigen::Index>(bi) * t_len, cg, t_len);
        const S mean = blk.sum() / n;
        const S var = (blk.array() - mean).square().sum() / n;
        const S inv = S(1) / std::sqrt(var + eps);
        c.inv_std(gi, bi) = inv;
        auto xh = c.xhat.block(gi * cg, static_cast<Eigen::Index>(bi) * t_len, cg, t_len);
        xh = (blk.array() - mean) * inv;
        auto yb = y.block(gi * cg, static_cast<Eigen::Index>(bi) * t_len, cg, t_len);
        for (int ci = 0; ci < cg; ++ci) {
          yb.row(ci) = xh.row(ci).array() * gamma(gi * cg + ci, 0) + beta(gi * cg + ci, 0);
        }
      }
    }
    return y;
  }

  Mat<S> backward(const ParameterStore<S>& p, const Cache& c, int batch, int t_len, const Mat<S>& dy,
                  ParameterStore<S>& g) const {
    const int cg = channels / groups;
    const S n = static_cast<S>(cg) * static_cast<S>(t_len);
    const auto gamma = as_matrix(p, w, channels, 1);
    auto dgamma = as_matrix(g, w, channels, 1);
    auto dbeta = as_matrix(g, b, channels, 1);
    dgamma.col(0) += (dy.array() * c.xhat.array()).matrix().rowwise().sum();
    dbeta.col(0) += dy.rowwise().sum();
    Mat<S> dx(dy.rows(), dy.cols());
    for (int bi = 0; bi < batch; ++bi) {
      for (int gi = 0; gi < groups; ++gi) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(bi) * t_len;
        const auto xh = c.xhat.block(gi * cg, c0, cg, t_len);
        Mat<S> dxh = dy.block(gi * cg, c0, cg, t_len);
        for (int ci = 0; ci < cg; ++ci) dxh.row(ci) *= gamma(gi * cg + ci, 0);
        const S sum_d = dxh.sum();
        const S sum_dx = (dxh.array() * xh.array()).sum();
        dx.block(gi * cg, c0, cg, t_len) =
            (c.inv_std(gi, bi) / n) * (n * dxh.array() - sum_d - xh.array() * sum_dx);
      }
    }
    return dx;
  }
};

}  // namespace fdp::nn
