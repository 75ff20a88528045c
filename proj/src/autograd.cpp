// SPDX-License-Identifier: Apache-2.0
#include "ssran/autograd.hpp"

#include <unordered_set>

namespace ssran {

namespace {
thread_local bool t_grad_enabled = true;
}

Var make_leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool grad_enabled() { return t_grad_enabled; }

void backward(const Var& loss) {
  if (!loss) throw ValueError("backward: null node");
  if (loss->value.numel() != 1) throw ShapeError("backward: loss must be a scalar");

  // Iterative post-order DFS; creation order already topologically sorts
  // the graph, but DFS keeps this independent of how callers build it.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss->grad_buf().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.numel() != 0) n->backward_fn(*n);
  }
}

}  // namespace ssran
