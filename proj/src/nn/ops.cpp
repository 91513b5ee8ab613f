#include "emg2artic/nn/ops.hpp"

#include "emg2artic/nn/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace emg2artic::nn {

namespace {

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void require_same_shape(const MatD& a, const MatD& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), what);
}

/// Row-wise softmax backward: dx = y * (dy - sum(dy * y)).
MatD softmax_rows_backward(const MatD& y, const MatD& dy) {
  const VecD dots = (dy.array() * y.array()).rowwise().sum();
  MatD dx = dy;
  dx.colwise() -= dots;
  return dx.cwiseProduct(y);
}

}  // namespace

Var constant(MatD value) { return Var(std::move(value), false); }

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add: shape mismatch");
  return Var::make(a.value() + b.value(), {a, b}, [](Node& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(self.grad);
  });
}

Var scale(const Var& x, double s) {
  return Var::make(x.value() * s, {x}, [s](Node& self) { parent(self, 0).accumulate_expr(self.grad * s); });
}

Var add_constant(const Var& x, const MatD& c) {
  require_same_shape(x.value(), c, "add_constant: shape mismatch");
  return Var::make(x.value() + c, {x}, [](Node& self) { parent(self, 0).accumulate(self.grad); });
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return Var::make(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate_expr(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate_expr(pa.value.transpose() * self.grad);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  MatD y = nn::linear<double>(x.value(), w.value(), b.value());
  return Var::make(std::move(y), {x, w, b}, [](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    Node& pb = parent(self, 2);
    if (px.requires_grad) px.accumulate_expr(self.grad * pw.value.transpose());
    if (pw.requires_grad) pw.accumulate_expr(px.value.transpose() * self.grad);
    if (pb.requires_grad) pb.accumulate_expr(self.grad.colwise().sum());
  });
}

Var conv1d(const Var& x, const Var& w, const Var& b, int kernel, int stride, int padding) {
  require(w.rows() == kernel * x.cols(), "conv1d: weight rows must equal kernel * C_in");
  MatD cols = im2col<double>(x.value(), kernel, stride, padding);
  MatD y = nn::linear<double>(cols, w.value(), b.value());
  const Eigen::Index t_in = x.rows();
  const Eigen::Index c_in = x.cols();
  return Var::make(std::move(y), {x, w, b},
                   [cols = std::move(cols), kernel, stride, padding, t_in, c_in](Node& self) {
                     Node& px = parent(self, 0);
                     Node& pw = parent(self, 1);
                     Node& pb = parent(self, 2);
                     if (pw.requires_grad) pw.accumulate_expr(cols.transpose() * self.grad);
                     if (pb.requires_grad) pb.accumulate_expr(self.grad.colwise().sum());
                     if (!px.requires_grad) return;
                     const MatD dcols = self.grad * pw.value.transpose();
                     MatD dx = MatD::Zero(t_in, c_in);
                     for (Eigen::Index t = 0; t < dcols.rows(); ++t) {
                       for (int j = 0; j < kernel; ++j) {
                         const Eigen::Index src = t * stride - padding + j;
                         if (src < 0 || src >= t_in) continue;
                         dx.row(src) += dcols.block(t, j * c_in, 1, c_in);
                       }
                     }
                     px.accumulate(dx);
                   });
}

Var relu(const Var& x) {
  return Var::make(nn::relu<double>(x.value()), {x}, [](Node& self) {
    Node& px = parent(self, 0);
    px.accumulate_expr((px.value.array() > 0.0).cast<double>() * self.grad.array());
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const MatD& xv = x.value();
  require(gamma.cols() == xv.cols() && beta.cols() == xv.cols(), "layer_norm: feature width mismatch");
  const Eigen::Index d = xv.cols();
  MatD xhat(xv.rows(), d);
  VecD inv_std(xv.rows());
  for (Eigen::Index t = 0; t < xv.rows(); ++t) {
    const double mean = xv.row(t).mean();
    const double var = (xv.row(t).array() - mean).square().mean();
    inv_std(t) = 1.0 / std::sqrt(var + eps);
    xhat.row(t) = (xv.row(t).array() - mean) * inv_std(t);
  }
  MatD y = xhat;
  y.array().rowwise() *= gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  return Var::make(std::move(y), {x, gamma, beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     Node& px = parent(self, 0);
                     Node& pg = parent(self, 1);
                     Node& pb = parent(self, 2);
                     const MatD& dy = self.grad;
                     if (pg.requires_grad) pg.accumulate_expr((dy.array() * xhat.array()).colwise().sum());
                     if (pb.requires_grad) pb.accumulate_expr(dy.colwise().sum());
                     if (!px.requires_grad) return;
                     MatD dxhat = dy;
                     dxhat.array().rowwise() *= pg.value.row(0).array();
                     const VecD m1 = dxhat.rowwise().mean();
                     const VecD m2 = (dxhat.array() * xhat.array()).rowwise().mean();
                     MatD dx = dxhat;
                     dx.colwise() -= m1;
                     dx -= (xhat.array().colwise() * m2.array()).matrix();
                     dx.array().colwise() *= inv_std.array();
                     px.accumulate(dx);
                   });
}

Var softmax(const Var& x, int axis) {
  MatD y = nn::softmax<double>(x.value(), axis);
  return Var::make(y, {x}, [y, axis](Node& self) {
    if (axis == 1) {
      parent(self, 0).accumulate(softmax_rows_backward(y, self.grad));
    } else {
      const MatD yt = y.transpose();
      const MatD gt = self.grad.transpose();
      parent(self, 0).accumulate(softmax_rows_backward(yt, gt).transpose());
    }
  });
}

Var multi_head_attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, const Var& wo,
                         int n_heads) {
  const Eigen::Index d = x.cols();
  require(n_heads >= 1 && d % n_heads == 0, "attention: width must be divisible by the head count");
  for (const Var* w : {&wq, &wk, &wv, &wo})
    require(w->rows() == d && w->cols() == d, "attention: projection shape mismatch");
  const Eigen::Index t = x.rows();
  const Eigen::Index dh = d / n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  MatD q = x.value() * wq.value();
  MatD k = x.value() * wk.value();
  MatD v = x.value() * wv.value();
  std::vector<MatD> probs(static_cast<std::size_t>(n_heads));
  MatD heads(t, d);
  for (int h = 0; h < n_heads; ++h) {
    const MatD scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * sc;
    probs[static_cast<std::size_t>(h)] = nn::softmax<double>(scores, 1);
    heads.middleCols(h * dh, dh) = probs[static_cast<std::size_t>(h)] * v.middleCols(h * dh, dh);
  }
  MatD y = heads * wo.value();
  return Var::make(
      std::move(y), {x, wq, wk, wv, wo},
      [q = std::move(q), k = std::move(k), v = std::move(v), probs = std::move(probs),
       heads = std::move(heads), n_heads, dh, sc](Node& self) {
        Node& px = parent(self, 0);
        Node& pq = parent(self, 1);
        Node& pk = parent(self, 2);
        Node& pv = parent(self, 3);
        Node& po = parent(self, 4);
        const MatD& dy = self.grad;
        if (po.requires_grad) po.accumulate_expr(heads.transpose() * dy);
        const MatD dheads = dy * po.value.transpose();
        MatD dq(q.rows(), q.cols()), dk(k.rows(), k.cols()), dv(v.rows(), v.cols());
        for (int h = 0; h < n_heads; ++h) {
          const MatD& p = probs[static_cast<std::size_t>(h)];
          const auto dout = dheads.middleCols(h * dh, dh);
          dv.middleCols(h * dh, dh) = p.transpose() * dout;
          const MatD dp = dout * v.middleCols(h * dh, dh).transpose();
          const MatD ds = softmax_rows_backward(p, dp) * sc;
          dq.middleCols(h * dh, dh) = ds * k.middleCols(h * dh, dh);
          dk.middleCols(h * dh, dh) = ds.transpose() * q.middleCols(h * dh, dh);
        }
        const MatD& xv = px.value;
        if (pq.requires_grad) pq.accumulate_expr(xv.transpose() * dq);
        if (pk.requires_grad) pk.accumulate_expr(xv.transpose() * dk);
        if (pv.requires_grad) pv.accumulate_expr(xv.transpose() * dv);
        if (px.requires_grad)
          px.accumulate_expr(dq * pq.value.transpose() + dk * pk.value.transpose() + dv * pv.value.transpose());
      });
}

namespace {

Var batch_norm_joint(const Var& x, const Var& gamma, const Var& beta, BatchNormStats stats, bool training,
                     double momentum, double eps) {
  const MatD& xv = x.value();
  const Eigen::Index c = xv.cols();
  require(gamma.cols() == c && beta.cols() == c && stats.running_mean.cols() == c &&
              stats.running_var.cols() == c,
          "batch_norm: channel count mismatch");
  if (!training) {
    const MatD inv = (stats.running_var.array() + eps).rsqrt().matrix();
    MatD xhat = xv;
    xhat.rowwise() -= stats.running_mean.row(0);
    xhat.array().rowwise() *= inv.row(0).array();
    MatD y = xhat;
    y.array().rowwise() *= gamma.value().row(0).array();
    y.rowwise() += beta.value().row(0);
    return Var::make(std::move(y), {x, gamma, beta}, [xhat = std::move(xhat), inv](Node& self) {
      Node& px = parent(self, 0);
      Node& pg = parent(self, 1);
      Node& pb = parent(self, 2);
      const MatD& dy = self.grad;
      if (pg.requires_grad) pg.accumulate_expr((dy.array() * xhat.array()).colwise().sum());
      if (pb.requires_grad) pb.accumulate_expr(dy.colwise().sum());
      if (px.requires_grad) {
        MatD dx = dy;
        dx.array().rowwise() *= (inv.array() * pg.value.array()).row(0);
        px.accumulate(dx);
      }
    });
  }

  const auto n = static_cast<double>(xv.rows());
  require(xv.rows() > 1, "batch_norm: training needs more than one frame per channel");
  const MatD mean = xv.colwise().mean();
  MatD centered = xv;
  centered.rowwise() -= mean.row(0);
  const MatD var = centered.array().square().colwise().mean().matrix();
  // Normalisation uses the biased variance; the running estimate the unbiased one.
  stats.running_mean = (1.0 - momentum) * stats.running_mean + momentum * mean;
  stats.running_var = (1.0 - momentum) * stats.running_var + momentum * var * (n / (n - 1.0));
  const MatD inv = (var.array() + eps).rsqrt().matrix();
  MatD xhat = centered;
  xhat.array().rowwise() *= inv.row(0).array();
  MatD y = xhat;
  y.array().rowwise() *= gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  return Var::make(std::move(y), {x, gamma, beta}, [xhat = std::move(xhat), inv](Node& self) {
    Node& px = parent(self, 0);
    Node& pg = parent(self, 1);
    Node& pb = parent(self, 2);
    const MatD& dy = self.grad;
    if (pg.requires_grad) pg.accumulate_expr((dy.array() * xhat.array()).colwise().sum());
    if (pb.requires_grad) pb.accumulate_expr(dy.colwise().sum());
    if (!px.requires_grad) return;
    MatD dxhat = dy;
    dxhat.array().rowwise() *= pg.value.row(0).array();
    const MatD m1 = dxhat.colwise().mean();
    const MatD m2 = (dxhat.array() * xhat.array()).colwise().mean().matrix();
    MatD dx = dxhat;
    dx.rowwise() -= m1.row(0);
    dx -= (xhat.array().rowwise() * m2.row(0).array()).matrix();
    dx.array().rowwise() *= inv.row(0).array();
    px.accumulate(dx);
  });
}

}  // namespace

std::vector<Var> batch_norm(const std::vector<Var>& xs, const Var& gamma, const Var& beta, BatchNormStats stats,
                            bool training, double momentum, double eps) {
  require(!xs.empty(), "batch_norm: empty batch");
  if (xs.size() == 1) return {batch_norm_joint(xs[0], gamma, beta, stats, training, momentum, eps)};
  const Var joint = batch_norm_joint(concat_rows(xs), gamma, beta, stats, training, momentum, eps);
  std::vector<Var> out;
  out.reserve(xs.size());
  Eigen::Index offset = 0;
  for (const auto& x : xs) {
    out.push_back(slice_rows(joint, offset, x.rows()));
    offset += x.rows();
  }
  return out;
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const Eigen::Index c = parts.front().cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    require(p.cols() == c, "concat_rows: column count mismatch");
    total += p.rows();
  }
  MatD y(total, c);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    y.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return Var::make(std::move(y), parts, [](Node& self) {
    Eigen::Index off = 0;
    for (auto& p : self.parents) {
      const Eigen::Index r = p->value.rows();
      if (p->requires_grad) p->accumulate_expr(self.grad.middleRows(off, r));
      off += r;
    }
  });
}

Var slice_rows(const Var& x, Eigen::Index begin, Eigen::Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), "slice_rows: range out of bounds");
  const Eigen::Index rows = x.rows();
  return Var::make(x.value().middleRows(begin, count), {x}, [begin, count, rows](Node& self) {
    Node& px = parent(self, 0);
    MatD g = MatD::Zero(rows, self.grad.cols());
    g.middleRows(begin, count) = self.grad;
    px.accumulate(g);
  });
}

Var mse_loss(const Var& pred, const MatD& target) {
  const double loss = nn::mse_loss<double>(pred.value(), target);
  MatD diff = pred.value() - target;
  const auto n = static_cast<double>(diff.size());
  return Var::make(MatD::Constant(1, 1, loss), {pred}, [diff = std::move(diff), n](Node& self) {
    parent(self, 0).accumulate_expr(diff * (2.0 * self.grad(0, 0) / n));
  });
}

Var cross_entropy_loss(const Var& logits, std::span<const int> targets) {
  const double loss = nn::cross_entropy_loss<double>(logits.value(), targets);
  MatD g = nn::softmax<double>(logits.value(), 1);
  for (Eigen::Index t = 0; t < g.rows(); ++t) g(t, targets[static_cast<std::size_t>(t)]) -= 1.0;
  g /= static_cast<double>(g.rows());
  return Var::make(MatD::Constant(1, 1, loss), {logits},
                   [g = std::move(g)](Node& self) { parent(self, 0).accumulate_expr(g * self.grad(0, 0)); });
}

Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights) {
  require(terms.size() == weights.size(), "weighted_sum: one weight per term");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require(terms[i].value().size() == 1, "weighted_sum: terms must be scalars");
    total += weights[i] * terms[i].item();
  }
  return Var::make(MatD::Constant(1, 1, total), terms, [weights](Node& self) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      self.parents[i]->accumulate_expr(MatD::Constant(1, 1, weights[i] * self.grad(0, 0)));
  });
}

}  // namespace emg2artic::nn
