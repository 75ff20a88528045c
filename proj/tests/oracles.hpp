// SPDX-License-Identifier: Apache-2.0
#pragma once

// Straight-line reference implementations used only by the tests. Everything
// here is written with explicit loops on std::vector<double>, independent of
// the tensor/op layer, so the two can disagree only if one of them is wrong.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ssran/tensor.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const ssran::Tensor& t) {
  Rows r(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) r[i][j] = t.at(i, j);
  return r;
}

inline std::vector<double> to_vec(const ssran::Tensor& t) { return t.values(); }

inline std::vector<double> softmax_vec(const std::vector<double>& x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = std::exp(x[j] - mx);
    z += out[j];
  }
  for (auto& v : out) v /= z;
  return out;
}

inline std::vector<double> masked_softmax_vec(const std::vector<double>& x, const ssran::Mask& m) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < x.size(); ++j)
    if (m[j]) mx = std::max(mx, x[j]);
  std::vector<double> out(x.size(), 0.0);
  double z = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (m[j]) {
      out[j] = std::exp(x[j] - mx);
      z += out[j];
    }
  for (std::size_t j = 0; j < x.size(); ++j)
    if (m[j]) out[j] /= z;
  return out;
}

// y = x W^T + b with W given as rows of output units (matching the linear op).
inline std::vector<double> affine_vec(const std::vector<double>& x, const Rows& w,
                                      const std::vector<double>& b) {
  std::vector<double> y(w.size(), 0.0);
  for (std::size_t o = 0; o < w.size(); ++o) {
    double s = b.empty() ? 0.0 : b[o];
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[o][i];
    y[o] = s;
  }
  return y;
}

inline std::vector<double> layer_norm_vec(const std::vector<double>& x,
                                          const std::vector<double>& gain,
                                          const std::vector<double>& bias, double eps = 1e-5) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= double(x.size());
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = gain[j] * (x[j] - mean) / std::sqrt(var + eps) + bias[j];
  return out;
}

// Scope weight matrix: row i is a masked softmax over
//   (h_i W1) . ((h_j + s_j + i_j) W2) / sqrt(d_model),
// where W1 and W2 multiply from the right as [d x d] matrices.
inline Rows scope_weights(const Rows& h, const Rows& s, const Rows& it, const ssran::Mask& m,
                          const Rows& w1, const Rows& w2) {
  std::size_t n = h.size(), d = h[0].size();
  Rows q(n, std::vector<double>(d, 0.0)), k(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t a = 0; a < d; ++a) {
        q[i][c] += h[i][a] * w1[a][c];
        k[i][c] += (h[i][a] + s[i][a] + it[i][a]) * w2[a][c];
      }
  Rows w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> alpha(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += q[i][c] * k[j][c];
      alpha[j] = dot / std::sqrt(double(d));
    }
    w[i] = masked_softmax_vec(alpha, m);
  }
  return w;
}

// out_j = v_j + sum over unmasked k of w[j][k] * v_k.
inline Rows apply_scope(const Rows& v, const Rows& w, const ssran::Mask& m) {
  std::size_t n = v.size(), d = v[0].size();
  Rows out(n, std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < d; ++c) {
      double s = v[j][c];
      for (std::size_t k = 0; k < n; ++k)
        if (m[k]) s += w[j][k] * v[k][c];
      out[j][c] = s;
    }
  return out;
}

// Expected label embedding: out_i = sum_c softmax(logits_i)[c] * table[c],
// masked rows forced to zero.
inline Rows embed_results(const Rows& logits, const Rows& table, const ssran::Mask& m) {
  std::size_t n = logits.size(), d = table[0].size(), c = table.size();
  Rows out(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!m[i]) continue;
    auto p = softmax_vec(logits[i]);
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t j = 0; j < d; ++j) out[i][j] += p[a] * table[a][j];
  }
  return out;
}

// Norm(h_hat_j + r_j + FFN(pool)) with pool the mean over unmasked rows.
inline Rows merge_states(const Rows& h_hat, const Rows& r, const ssran::Mask& m, const Rows& w1,
                         const std::vector<double>& b1, const Rows& w2,
                         const std::vector<double>& b2, const std::vector<double>& gain,
                         const std::vector<double>& bias) {
  std::size_t n = h_hat.size(), d = h_hat[0].size();
  std::vector<double> pool(d, 0.0);
  double cnt = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (m[i]) {
      for (std::size_t j = 0; j < d; ++j) pool[j] += h_hat[i][j];
      cnt += 1.0;
    }
  for (auto& v : pool) v /= cnt;
  auto hidden = affine_vec(pool, w1, b1);
  for (auto& v : hidden) v = std::max(0.0, v);
  auto f = affine_vec(hidden, w2, b2);
  Rows out(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pre(d);
    for (std::size_t j = 0; j < d; ++j) pre[j] = h_hat[i][j] + r[i][j] + f[j];
    out[i] = layer_norm_vec(pre, gain, bias);
  }
  return out;
}

inline double ce_rows_sum(const Rows& logits, const std::vector<int>& gold, const ssran::Mask& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!m[i]) continue;
    auto p = softmax_vec(logits[i]);
    total += -std::log(p[std::size_t(gold[i])]);
  }
  return total;
}

inline double ce_single(const std::vector<double>& logits, int gold) {
  auto p = softmax_vec(logits);
  return -std::log(p[std::size_t(gold)]);
}

inline double bce_rows_sum(const Rows& logits, const std::vector<double>& target,
                           const ssran::Mask& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!m[i]) continue;
    for (std::size_t c = 0; c < logits[i].size(); ++c) {
      double p = 1.0 / (1.0 + std::exp(-logits[i][c]));
      total += -(target[c] * std::log(p) + (1.0 - target[c]) * std::log(1.0 - p));
    }
  }
  return total;
}

inline double nll_probs_rows_sum(const Rows& probs, const std::vector<int>& gold,
                                 const ssran::Mask& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (m[i]) total += -std::log(probs[i][std::size_t(gold[i])]);
  return total;
}

}  // namespace oracle
