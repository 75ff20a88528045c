// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>

namespace ssran {

// 53-bit draw mapped to [0,1); identical across standard-library
// implementations, unlike uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double unit_gauss(std::mt19937_64& rng) {
  // Box-Muller transform; u1 shifted into (0,1] so the log stays finite.
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace ssran
