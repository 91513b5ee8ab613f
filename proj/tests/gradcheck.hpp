#pragma once

// Central finite-difference gradient checker for the autograd ops.

#include "emg2artic/nn/autograd.hpp"
#include "emg2artic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace gradcheck {

using emg2artic::MatD;
using emg2artic::nn::Node;
using emg2artic::nn::Var;

inline MatD random_matrix(Eigen::Index r, Eigen::Index c, emg2artic::Rng& rng, double scale = 1.0) {
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

/// sum(y .* w): a generic linear read-out turning any output into a scalar.
inline Var project(const Var& y, const MatD& w) {
  const double v = y.value().cwiseProduct(w).sum();
  return Var::make(MatD::Constant(1, 1, v), {y},
                   [w](Node& self) { self.parents[0]->accumulate_expr(w * self.grad(0, 0)); });
}

struct Result {
  double worst_rel = 0.0;
  std::size_t checked = 0;
};

/// `f` builds a scalar from leaf Vars. Every element of every input is
/// perturbed by +-h and compared with the analytic gradient.
inline Result check(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<MatD>& inputs,
                    double h = 1e-5, double floor = 1e-6) {
  std::vector<Var> leaves;
  for (const auto& m : inputs) leaves.emplace_back(m, true);
  f(leaves).backward();

  Result res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const MatD analytic = leaves[k].grad().size() ? leaves[k].grad() : MatD::Zero(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> xs;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          MatD m = inputs[j];
          if (j == k) m.data()[i] += delta;
          xs.emplace_back(std::move(m), false);
        }
        return f(xs).item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      res.worst_rel = std::max(res.worst_rel, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace gradcheck
