// SPDX-License-Identifier: Apache-2.0
#include "ssran/tensor.hpp"

#include <atomic>
#include <cmath>

namespace ssran {

namespace {
std::atomic<bool> g_finite_checks{true};
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled, std::memory_order_relaxed); }
bool finite_checks_enabled() { return g_finite_checks.load(std::memory_order_relaxed); }

void check_finite(const Tensor& t, const char* where) {
  if (!finite_checks_enabled()) return;
  for (double x : t.values()) {
    if (!std::isfinite(x))
      throw ValueError(std::string("non-finite value produced by ") + where);
  }
}

}  // namespace ssran
