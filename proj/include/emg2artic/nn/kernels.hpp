#pragma once

// Forward kernels for the encoder primitives, templated on the scalar type so
// the same code serves double-precision training and float inference. The
// differentiable wrappers in ops.hpp call into these.

#include "emg2artic/types.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace emg2artic::nn {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

inline Eigen::Index conv_output_length(Eigen::Index t, int kernel, int stride, int padding) {
  require(kernel >= 1 && stride >= 1 && padding >= 0, "conv1d: invalid kernel/stride/padding");
  require(t + 2 * padding >= kernel, "conv1d: input shorter than kernel");
  return (t + 2 * padding - kernel) / stride + 1;
}

/// y = x W + b, x [T, d_in], W [d_in, d_out], b [1, d_out].
template <typename S>
Mat<S> linear(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b) {
  require(x.cols() == w.rows(), "linear: input width does not match weight rows");
  require(b.rows() == 1 && b.cols() == w.cols(), "linear: bias shape mismatch");
  Mat<S> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

/// Patch matrix [T_out, kernel * C_in]; column j * C_in + c holds
/// x[t * stride - padding + j, c] (zero outside the sequence).
template <typename S>
Mat<S> im2col(const Mat<S>& x, int kernel, int stride, int padding) {
  const Eigen::Index t_in = x.rows();
  const Eigen::Index c_in = x.cols();
  const Eigen::Index t_out = conv_output_length(t_in, kernel, stride, padding);
  Mat<S> cols = Mat<S>::Zero(t_out, kernel * c_in);
  for (Eigen::Index t = 0; t < t_out; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Eigen::Index src = t * stride - padding + j;
      if (src < 0 || src >= t_in) continue;
      cols.block(t, j * c_in, 1, c_in) = x.row(src);
    }
  }
  return cols;
}

/// Zero-padded cross-correlation. W is stored flattened as [kernel * C_in, C_out].
template <typename S>
Mat<S> conv1d(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b, int kernel, int stride, int padding) {
  require(w.rows() == kernel * x.cols(), "conv1d: weight rows must equal kernel * C_in");
  return linear<S>(im2col(x, kernel, stride, padding), w, b);
}

template <typename S>
Mat<S> relu(const Mat<S>& x) {
  return x.cwiseMax(S(0));
}

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta, S eps = S(1e-5)) {
  require(gamma.cols() == x.cols() && beta.cols() == x.cols(), "layer_norm: feature width mismatch");
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const S mean = x.row(t).mean();
    const S var = (x.row(t).array() - mean).square().mean();
    const S inv = S(1) / std::sqrt(var + eps);
    y.row(t) = ((x.row(t).array() - mean) * inv * gamma.row(0).array() + beta.row(0).array()).matrix();
  }
  return y;
}

/// Inference-mode batch norm with fixed statistics.
template <typename S>
Mat<S> batch_norm_inference(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta,
                            const Mat<S>& mean, const Mat<S>& var, S eps = S(1e-5)) {
  require(gamma.cols() == x.cols() && mean.cols() == x.cols() && var.cols() == x.cols(),
          "batch_norm: channel count mismatch");
  const auto scale = (gamma.array() / (var.array() + eps).sqrt()).eval();
  const auto shift = (beta.array() - mean.array() * scale).eval();
  Mat<S> y = x;
  y.array().rowwise() *= scale.row(0);
  y.array().rowwise() += shift.row(0);
  return y;
}

/// Max-subtracted softmax along axis 1 (rows) or 0 (columns).
template <typename S>
Mat<S> softmax(const Mat<S>& x, int axis = 1) {
  require(axis == 0 || axis == 1, "softmax: axis must be 0 or 1");
  if (axis == 0) return softmax<S>(Mat<S>(x.transpose()), 1).transpose();
  Mat<S> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

/// Sinusoidal absolute positions: sin on even, cos on odd feature indices.
template <typename S>
Mat<S> positional_encoding(Eigen::Index t, Eigen::Index d) {
  require(d % 2 == 0, "positional_encoding: feature width must be even");
  Mat<S> pe(t, d);
  for (Eigen::Index i = 0; i < d; i += 2) {
    const double inv_wavelength = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    for (Eigen::Index p = 0; p < t; ++p) {
      const double angle = static_cast<double>(p) * inv_wavelength;
      pe(p, i) = static_cast<S>(std::sin(angle));
      pe(p, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

/// Bidirectional scaled dot-product self-attention with an output projection.
template <typename S>
Mat<S> multi_head_attention(const Mat<S>& x, const Mat<S>& wq, const Mat<S>& wk, const Mat<S>& wv,
                            const Mat<S>& wo, int n_heads) {
  const Eigen::Index d = x.cols();
  require(n_heads >= 1 && d % n_heads == 0, "attention: width must be divisible by the head count");
  require(wq.rows() == d && wq.cols() == d && wk.rows() == d && wk.cols() == d && wv.rows() == d &&
              wv.cols() == d && wo.rows() == d && wo.cols() == d,
          "attention: projection shape mismatch");
  const Eigen::Index dh = d / n_heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  const Mat<S> q = x * wq, k = x * wk, v = x * wv;
  Mat<S> heads(x.rows(), d);
  for (int h = 0; h < n_heads; ++h) {
    const Mat<S> scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    heads.middleCols(h * dh, dh) = softmax<S>(scores, 1) * v.middleCols(h * dh, dh);
  }
  return heads * wo;
}

template <typename S>
S mse_loss(const Mat<S>& pred, const Mat<S>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse_loss: shape mismatch");
  require(pred.size() > 0, "mse_loss: empty input");
  return (pred - target).squaredNorm() / static_cast<S>(pred.size());
}

template <typename S>
S cross_entropy_loss(const Mat<S>& logits, std::span<const int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy: length mismatch");
  require(logits.rows() > 0, "cross_entropy: empty input");
  S total = 0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const int y = targets[static_cast<std::size_t>(t)];
    require(y >= 0 && y < logits.cols(), "cross_entropy: target class out of range");
    const S m = logits.row(t).maxCoeff();
    const S lse = m + std::log((logits.row(t).array() - m).exp().sum());
    total += lse - logits(t, y);
  }
  return total / static_cast<S>(logits.rows());
}

}  // namespace emg2artic::nn
