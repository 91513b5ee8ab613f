#include "emg2artic/nn/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace emg2artic::nn {

void Node::accumulate(const MatD& g) { accumulate_expr(g); }

Var::Var(MatD value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (node_->value.size() != 1) throw std::logic_error("item() on a non-scalar Var");
  return node_->value(0, 0);
}

void Var::zero_grad() { node_->grad.resize(0, 0); }

Var Var::make(MatD value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  Var out(std::move(value), false);
  for (const auto& p : parents) {
    if (p.requires_grad()) {
      out.node_->requires_grad = true;
      break;
    }
  }
  if (out.node_->requires_grad) {
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

void Var::backward() const {
  if (node_->value.size() != 1) throw std::logic_error("backward() needs a scalar output");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->accumulate(MatD::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

}  // namespace emg2artic::nn
