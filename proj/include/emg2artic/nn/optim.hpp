#pragma once

#include "emg2artic/nn/params.hpp"

#include <vector>

namespace emg2artic::nn {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-7;
};

struct AdamMoments {
  MatD m;
  MatD v;
};

/// One decoupled-weight-decay Adam update of a single tensor at step `t`
/// (1-based): p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p).
/// Throws std::runtime_error on a non-finite gradient.
void adamw_update(MatD& param, const MatD& grad, AdamMoments& moments, long step, const AdamWConfig& cfg);

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  /// Updates every trainable parameter of `store`. Parameters without a
  /// gradient are treated as having a zero gradient.
  void step(ParamStore& store);

  long steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  long t_ = 0;
  std::vector<AdamMoments> moments_;
};

/// Global L2 norm of all trainable gradients.
double grad_norm(const ParamStore& store);
/// Rescales gradients so the global norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

}  // namespace emg2artic::nn
