// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "ssran/autograd.hpp"
#include "ssran/model.hpp"
#include "ssran/rng.hpp"
#include "ssran/tensor.hpp"

namespace testing_support {

inline ssran::Tensor rand_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  ssran::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = lo + (hi - lo) * ssran::unit_uniform(rng);
  return t;
}

inline ssran::Var rand_leaf(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  return ssran::make_leaf(rand_tensor(std::move(shape), rng, lo, hi), requires_grad);
}

// Random mask with at least one unmasked position.
inline ssran::Mask rand_mask(std::size_t n, std::mt19937_64& rng) {
  ssran::Mask m(n);
  for (auto& b : m) b = rng() % 2;
  m[rng() % n] = 1;
  return m;
}

inline ssran::ModelConfig tiny_config(std::size_t vocab = 12, std::size_t slots = 5,
                                      std::size_t intents = 3) {
  ssran::ModelConfig c;
  c.d_model = 8;
  c.d_ff = 16;
  c.heads = 2;
  c.rel_clip = 4;
  c.dropout = 0.0;
  c.vocab_size = vocab;
  c.num_slots = slots;
  c.num_intents = intents;
  return c;
}

inline double max_abs_diff(const ssran::Tensor& a, const ssran::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

}  // namespace testing_support
