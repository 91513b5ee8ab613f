#include "emg2artic/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace emg2artic::nn {

Var ParamStore::add(std::string name, std::vector<Eigen::Index> shape, MatD value, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const Eigen::Index numel = std::accumulate(shape.begin(), shape.end(), Eigen::Index{1}, std::multiplies<>());
  if (numel != value.size()) throw std::invalid_argument("parameter " + name + ": shape does not match value");
  entries_.push_back({std::move(name), std::move(shape), Var(std::move(value), trainable), trainable});
  return entries_.back().var;
}

Var& ParamStore::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.var;
  throw std::out_of_range("unknown parameter: " + name);
}

const Var& ParamStore::get(const std::string& name) const {
  return const_cast<ParamStore*>(this)->get(name);
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Parameter& e) { return e.name == name; });
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, e.shape, e.var.value(), e.trainable);
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) throw std::invalid_argument("parameter layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name || entries_[i].shape != other.entries_[i].shape)
      throw std::invalid_argument("parameter layouts differ at " + entries_[i].name);
    entries_[i].var.mutable_value() = other.entries_[i].var.value();
  }
}

std::size_t ParamStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable || !trainable_only) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

MatD kaiming_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, double gain, Rng& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  MatD w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

}  // namespace emg2artic::nn
