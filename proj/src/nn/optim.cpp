#include "emg2artic/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace emg2artic::nn {

void adamw_update(MatD& param, const MatD& grad, AdamMoments& moments, long step, const AdamWConfig& cfg) {
  if (grad.size() != 0 && !grad.allFinite()) throw std::runtime_error("adamw: non-finite gradient");
  if (moments.m.size() == 0) {
    moments.m = MatD::Zero(param.rows(), param.cols());
    moments.v = MatD::Zero(param.rows(), param.cols());
  }
  if (grad.size() != 0) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols())
      throw std::invalid_argument("adamw: gradient shape mismatch");
    moments.m = cfg.beta1 * moments.m + (1.0 - cfg.beta1) * grad;
    moments.v = cfg.beta2 * moments.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  } else {
    moments.m *= cfg.beta1;
    moments.v *= cfg.beta2;
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const auto m_hat = moments.m.array() / bc1;
  const auto v_hat = moments.v.array() / bc2;
  param.array() -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * param.array());
}

void AdamW::step(ParamStore& store) {
  auto& entries = store.entries();
  if (moments_.empty()) moments_.resize(entries.size());
  if (moments_.size() != entries.size()) throw std::logic_error("adamw: parameter set changed");
  ++t_;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].trainable) continue;
    adamw_update(entries[i].var.mutable_value(), entries[i].var.grad(), moments_[i], t_, cfg_);
  }
}

double grad_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const auto& e : store.entries())
    if (e.trainable && e.var.grad().size() != 0) sq += e.var.grad().squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  const double norm = grad_norm(store);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& e : store.entries())
      if (e.trainable && e.var.grad().size() != 0) e.var.node()->grad *= s;
  }
  return norm;
}

}  // namespace emg2artic::nn
