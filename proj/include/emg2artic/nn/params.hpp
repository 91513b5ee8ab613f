#pragma once

#include "emg2artic/nn/autograd.hpp"
#include "emg2artic/rng.hpp"

#include <string>
#include <vector>

namespace emg2artic::nn {

struct Parameter {
  std::string name;
  /// Logical shape; the value is stored as a 2-D matrix whose size matches
  /// the product of this shape (conv weights [k, C_in, C_out] live as
  /// [k * C_in, C_out]).
  std::vector<Eigen::Index> shape;
  Var var;
  bool trainable = true;  // false for batch-norm running statistics
};

/// Ordered parameter container; insertion order is the canonical order used
/// for serialisation and optimisation.
class ParamStore {
 public:
  Var add(std::string name, std::vector<Eigen::Index> shape, MatD value, bool trainable = true);

  Var& get(const std::string& name);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter>& entries() { return entries_; }
  const std::vector<Parameter>& entries() const { return entries_; }

  void zero_grad();
  /// Deep copy: new nodes, same values.
  ParamStore clone() const;
  /// Copy values from another store with an identical layout.
  void assign_values(const ParamStore& other);
  std::size_t scalar_count(bool trainable_only = true) const;

 private:
  std::vector<Parameter> entries_;
};

/// U(-bound, bound) with bound = gain * sqrt(3 / fan_in).
MatD kaiming_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, double gain, Rng& rng);

}  // namespace emg2artic::nn
