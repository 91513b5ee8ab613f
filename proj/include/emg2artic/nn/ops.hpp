#pragma once

// Differentiable primitives. Shapes follow the kernels: sequences are
// [T, features], biases and norm gains are [1, features] row vectors.

#include "emg2artic/nn/autograd.hpp"

#include <span>
#include <vector>

namespace emg2artic::nn {

Var constant(MatD value);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double s);
/// x + c for a fixed matrix c (positional encoding).
Var add_constant(const Var& x, const MatD& c);
Var matmul(const Var& a, const Var& b);

Var linear(const Var& x, const Var& w, const Var& b);
Var conv1d(const Var& x, const Var& w, const Var& b, int kernel, int stride, int padding);
Var relu(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax(const Var& x, int axis = 1);
Var multi_head_attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, const Var& wo,
                         int n_heads);

/// Running statistics owned by the caller (model buffers), shape [1, C].
struct BatchNormStats {
  MatD& running_mean;
  MatD& running_var;
};

/// Batch norm over every frame of every sequence in `xs` (the [B, T, C]
/// batch with per-sequence lengths). Training mode normalises with the batch
/// statistics and updates the running ones; inference mode uses the running
/// statistics and leaves them untouched.
std::vector<Var> batch_norm(const std::vector<Var>& xs, const Var& gamma, const Var& beta,
                            BatchNormStats stats, bool training, double momentum = 0.1,
                            double eps = 1e-5);

Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& x, Eigen::Index begin, Eigen::Index count);

Var mse_loss(const Var& pred, const MatD& target);
Var cross_entropy_loss(const Var& logits, std::span<const int> targets);
/// sum_i w_i * terms_i for 1x1 terms.
Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights);

}  // namespace emg2artic::nn
