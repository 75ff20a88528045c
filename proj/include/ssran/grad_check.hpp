// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ssran/autograd.hpp"

namespace ssran {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of loss_fn against central differences,
// element by element, for every listed parameter. loss_fn must rebuild the
// graph from the given leaves on each call and return a scalar.
GradCheckReport grad_check(const std::vector<std::pair<std::string, Var>>& params,
                           const std::function<Var()>& loss_fn, double h = 1e-5);

}  // namespace ssran
