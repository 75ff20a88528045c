// SPDX-License-Identifier: Apache-2.0
#include "ssran/grad_check.hpp"

#include <cmath>

namespace ssran {

GradCheckReport grad_check(const std::vector<std::pair<std::string, Var>>& params,
                           const std::function<Var()>& loss_fn, double h) {
  for (const auto& [name, p] : params) p->zero_grad();
  Var loss = loss_fn();
  backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) analytic.push_back(p->grad_buf());

  GradCheckReport rep;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& name = params[pi].first;
    auto& value = params[pi].second->value;
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double orig = value.at(i);
      value.at(i) = orig + h;
      const double fp = loss_fn()->value.item();
      value.at(i) = orig - h;
      const double fm = loss_fn()->value.item();
      value.at(i) = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = analytic[pi].at(i);
      const double rel = std::abs(fd - g) / std::max(1.0, std::abs(fd) + std::abs(g));
      ++rep.checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = i;
        rep.worst_analytic = g;
        rep.worst_numeric = fd;
      }
    }
  }
  return rep;
}

}  // namespace ssran
