// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ssran/tensor.hpp"

namespace ssran {

// Reverse-mode graph node. Ops allocate one node per result; parents are
// held by shared_ptr so a forward graph stays alive exactly as long as
// some Var still references it. Leaves (parameters, inputs under test)
// keep their grad buffer across backward calls until explicitly zeroed.
struct Node {
  Tensor value;
  Tensor grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // accumulates into parents' grads

  Tensor& grad_buf() {
    if (grad.numel() == 0) grad = Tensor(value.shape());
    return grad;
  }
  void zero_grad() {
    if (grad.numel() != 0) grad.fill(0.0);
  }
};

using Var = std::shared_ptr<Node>;

/// Leaf node. requires_grad marks it as a differentiation target.
Var make_leaf(Tensor value, bool requires_grad);

/// Constant leaf (no gradient ever flows into it).
inline Var make_const(Tensor value) { return make_leaf(std::move(value), false); }

/// Runs reverse-mode accumulation from a scalar node. Seeds d(loss)/d(loss)=1
/// and walks the graph in reverse topological (creation) order. Gradients
/// accumulate; callers zero leaf grads between independent passes.
void backward(const Var& loss);

/// Thread-local switch: while any guard is alive, ops record no parents and
/// no backward closures (pure value computation, e.g. evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

}  // namespace ssran
