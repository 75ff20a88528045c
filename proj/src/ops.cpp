// SPDX-License-Identifier: Apache-2.0
#include "ssran/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "ssran/kernels.hpp"
#include "ssran/rng.hpp"

namespace ssran::ops {

namespace {

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw,
            const char* name) {
  check_finite(value, name);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool track = grad_enabled();
  if (track) {
    track = false;
    for (const auto& p : parents)
      if (p && p->requires_grad) {
        track = true;
        break;
      }
  }
  if (track) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
  }
  return n;
}

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}

std::size_t count_unmasked(const Mask& m) {
  std::size_t c = 0;
  for (auto b : m) c += b ? 1 : 0;
  return c;
}

inline int rel_index(std::size_t i, std::size_t j, int clip) {
  int off = static_cast<int>(j) - static_cast<int>(i);
  off = std::clamp(off, -clip, clip);
  return off + clip;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch");
  Tensor out = a->value;
  const auto& bv = b->value.values();
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) += bv[i];
  Node *pa = a.get(), *pb = b.get();
  return make_op(std::move(out), {a, b},
                 [pa, pb](Node& self) {
                   const auto& g = self.grad.values();
                   if (pa->requires_grad) {
                     auto& ga = pa->grad_buf().values();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                   }
                   if (pb->requires_grad) {
                     auto& gb = pb->grad_buf().values();
                     for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                   }
                 },
                 "add");
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  const auto& bv = b->value.values();
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) -= bv[i];
  Node *pa = a.get(), *pb = b.get();
  return make_op(std::move(out), {a, b},
                 [pa, pb](Node& self) {
                   const auto& g = self.grad.values();
                   if (pa->requires_grad) {
                     auto& ga = pa->grad_buf().values();
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                   }
                   if (pb->requires_grad) {
                     auto& gb = pb->grad_buf().values();
                     for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                   }
                 },
                 "sub");
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (auto& x : out.values()) x *= s;
  Node* pa = a.get();
  return make_op(std::move(out), {a},
                 [pa, s](Node& self) {
                   const auto& g = self.grad.values();
                   auto& ga = pa->grad_buf().values();
                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                 },
                 "scale");
}

Var add_rowvec(const Var& x, const Var& v) {
  require(x->value.rank() == 2, "add_rowvec: x must be rank 2");
  require(v->value.rank() == 1, "add_rowvec: v must be rank 1");
  const std::size_t n = x->value.dim(0), d = x->value.dim(1);
  require(v->value.dim(0) == d, "add_rowvec: width mismatch");
  Tensor out = x->value;
  const double* vv = v->value.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) row[j] += vv[j];
  }
  Node *px = x.get(), *pv = v.get();
  return make_op(std::move(out), {x, v},
                 [px, pv, n, d](Node& self) {
                   const double* g = self.grad.data();
                   if (px->requires_grad) {
                     double* gx = px->grad_buf().data();
                     for (std::size_t i = 0; i < n * d; ++i) gx[i] += g[i];
                   }
                   if (pv->requires_grad) {
                     double* gv = pv->grad_buf().data();
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < d; ++j) gv[j] += g[i * d + j];
                   }
                 },
                 "add_rowvec");
}

Var matmul(const Var& a, const Var& b) {
  require(a->value.rank() == 2 && b->value.rank() == 2, "matmul: rank-2 operands required");
  const std::size_t m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  require(b->value.dim(0) == k, "matmul: inner dimension mismatch");
  Tensor out({m, n});
  kernels::gemm_nn(a->value.data(), b->value.data(), out.data(), m, k, n, false);
  Node *pa = a.get(), *pb = b.get();
  return make_op(std::move(out), {a, b},
                 [pa, pb, m, k, n](Node& self) {
                   const double* g = self.grad.data();
                   if (pa->requires_grad)
                     kernels::gemm_nt(g, pb->value.data(), pa->grad_buf().data(), m, n, k, true);
                   if (pb->requires_grad)
                     kernels::gemm_tn(pa->value.data(), g, pb->grad_buf().data(), k, m, n, true);
                 },
                 "matmul");
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a->value.rank() == 2 && b->value.rank() == 2, "matmul_nt: rank-2 operands required");
  const std::size_t m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(0);
  require(b->value.dim(1) == k, "matmul_nt: inner dimension mismatch");
  Tensor out({m, n});
  kernels::gemm_nt(a->value.data(), b->value.data(), out.data(), m, k, n, false);
  Node *pa = a.get(), *pb = b.get();
  return make_op(std::move(out), {a, b},
                 [pa, pb, m, k, n](Node& self) {
                   const double* g = self.grad.data();
                   if (pa->requires_grad)
                     kernels::gemm_nn(g, pb->value.data(), pa->grad_buf().data(), m, n, k, true);
                   if (pb->requires_grad)
                     kernels::gemm_tn(g, pa->value.data(), pb->grad_buf().data(), n, m, k, true);
                 },
                 "matmul_nt");
}

Var relu(const Var& x) {
  Tensor out = x->value;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px](Node& self) {
                   const auto& g = self.grad.values();
                   const auto& xv = px->value.values();
                   auto& gx = px->grad_buf().values();
                   for (std::size_t i = 0; i < g.size(); ++i)
                     if (xv[i] > 0.0) gx[i] += g[i];
                 },
                 "relu");
}

Var sigmoid(const Var& x) {
  Tensor out = x->value;
  for (auto& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px](Node& self) {
                   const auto& g = self.grad.values();
                   const auto& y = self.value.values();
                   auto& gx = px->grad_buf().values();
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
                 },
                 "sigmoid");
}

Var softmax_rows(const Var& x) {
  const std::size_t n = x->value.rows(), d = x->value.cols();
  require(d >= 1, "softmax_rows: empty rows");
  Tensor out = x->value;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * d;
    double mx = row[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) row[j] /= sum;
  }
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px, n, d](Node& self) {
                   auto& gx = px->grad_buf();
                   for (std::size_t i = 0; i < n; ++i) {
                     const double* y = self.value.data() + i * d;
                     const double* g = self.grad.data() + i * d;
                     double dot = 0.0;
                     for (std::size_t j = 0; j < d; ++j) dot += y[j] * g[j];
                     double* gr = gx.data() + i * d;
                     for (std::size_t j = 0; j < d; ++j) gr[j] += y[j] * (g[j] - dot);
                   }
                 },
                 "softmax_rows");
}

Var masked_softmax_rows(const Var& x, Mask mask) {
  require(x->value.rank() == 2, "masked_softmax_rows: rank-2 input required");
  const std::size_t n = x->value.dim(0), d = x->value.dim(1);
  require(mask.size() == d, "masked_softmax_rows: mask length mismatch");
  if (count_unmasked(mask) == 0) throw ValueError("masked_softmax_rows: all columns masked");
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x->value.data() + i * d;
    double* o = out.data() + i * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j)
      if (mask[j]) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (mask[j]) {
        o[j] = std::exp(row[j] - mx);
        sum += o[j];
      } else {
        o[j] = 0.0;
      }
    }
    for (std::size_t j = 0; j < d; ++j)
      if (mask[j]) o[j] /= sum;
  }
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px, mask = std::move(mask), n, d](Node& self) {
                   auto& gx = px->grad_buf();
                   for (std::size_t i = 0; i < n; ++i) {
                     const double* y = self.value.data() + i * d;
                     const double* g = self.grad.data() + i * d;
                     double dot = 0.0;
                     for (std::size_t j = 0; j < d; ++j)
                       if (mask[j]) dot += y[j] * g[j];
                     double* gr = gx.data() + i * d;
                     for (std::size_t j = 0; j < d; ++j)
                       if (mask[j]) gr[j] += y[j] * (g[j] - dot);
                   }
                 },
                 "masked_softmax_rows");
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const std::size_t n = x->value.rows(), d = x->value.cols();
  require(d >= 2, "layer_norm: last axis must have size >= 2");
  require(gain->value.rank() == 1 && gain->value.dim(0) == d, "layer_norm: gain shape");
  require(bias->value.rank() == 1 && bias->value.dim(0) == d, "layer_norm: bias shape");
  Tensor out(x->value.shape());
  Tensor xhat(x->value.shape());
  std::vector<double> inv_std(n);
  const double* gv = gain->value.data();
  const double* bv = bias->value.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x->value.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    double* xh = xhat.data() + i * d;
    double* o = out.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (row[j] - mu) * inv;
      o[j] = xh[j] * gv[j] + bv[j];
    }
  }
  Node *px = x.get(), *pg = gain.get(), *pb = bias.get();
  return make_op(
      std::move(out), {x, gain, bias},
      [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), n, d](Node& self) {
        const double dd = static_cast<double>(d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* g = self.grad.data() + i * d;
          const double* xh = xhat.data() + i * d;
          if (pg->requires_grad) {
            double* gg = pg->grad_buf().data();
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[j] * xh[j];
          }
          if (pb->requires_grad) {
            double* gb = pb->grad_buf().data();
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[j];
          }
          if (px->requires_grad) {
            const double* gainv = pg->value.data();
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double h = g[j] * gainv[j];
              m1 += h;
              m2 += h * xh[j];
            }
            m1 /= dd;
            m2 /= dd;
            double* gx = px->grad_buf().data() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
              const double h = g[j] * gainv[j];
              gx[j] += (h - m1 - xh[j] * m2) * inv_std[i];
            }
          }
        }
      },
      "layer_norm");
}

Var mean_pool_rows(const Var& x, Mask mask) {
  require(x->value.rank() == 2, "mean_pool_rows: rank-2 input required");
  const std::size_t n = x->value.dim(0), d = x->value.dim(1);
  require(mask.size() == n, "mean_pool_rows: mask length mismatch");
  const std::size_t c = count_unmasked(mask);
  if (c == 0) throw ValueError("mean_pool_rows: all rows masked");
  Tensor out({d});
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double* row = x->value.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) out.at(j) += row[j];
  }
  const double invc = 1.0 / static_cast<double>(c);
  for (std::size_t j = 0; j < d; ++j) out.at(j) *= invc;
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px, mask = std::move(mask), n, d, invc](Node& self) {
                   const double* g = self.grad.data();
                   double* gx = px->grad_buf().data();
                   for (std::size_t i = 0; i < n; ++i) {
                     if (!mask[i]) continue;
                     for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * invc;
                   }
                 },
                 "mean_pool_rows");
}

Var embedding_rows(const Var& table, std::vector<int> ids) {
  require(table->value.rank() == 2, "embedding_rows: table must be rank 2");
  const std::size_t v = table->value.dim(0), d = table->value.dim(1);
  const std::size_t n = ids.size();
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw ValueError("embedding_rows: id out of range");
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(out.data() + i * d, table->value.data() + static_cast<std::size_t>(ids[i]) * d,
                d * sizeof(double));
  Node* pt = table.get();
  return make_op(std::move(out), {table},
                 [pt, ids = std::move(ids), d](Node& self) {
                   double* gt = pt->grad_buf().data();
                   const double* g = self.grad.data();
                   for (std::size_t i = 0; i < ids.size(); ++i) {
                     double* dst = gt + static_cast<std::size_t>(ids[i]) * d;
                     const double* src = g + i * d;
                     for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                   }
                 },
                 "embedding_rows");
}

Var slice_cols(const Var& x, std::size_t start, std::size_t len) {
  require(x->value.rank() == 2, "slice_cols: rank-2 input required");
  const std::size_t n = x->value.dim(0), d = x->value.dim(1);
  require(start + len <= d, "slice_cols: range out of bounds");
  Tensor out({n, len});
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(out.data() + i * len, x->value.data() + i * d + start, len * sizeof(double));
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px, start, len, n, d](Node& self) {
                   double* gx = px->grad_buf().data();
                   const double* g = self.grad.data();
                   for (std::size_t i = 0; i < n; ++i)
                     for (std::size_t j = 0; j < len; ++j) gx[i * d + start + j] += g[i * len + j];
                 },
                 "slice_cols");
}

Var concat_cols(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input list");
  const std::size_t n = xs[0]->value.dim(0);
  std::size_t total = 0;
  for (const auto& x : xs) {
    require(x->value.rank() == 2 && x->value.dim(0) == n, "concat_cols: row mismatch");
    total += x->value.dim(1);
  }
  Tensor out({n, total});
  std::size_t off = 0;
  for (const auto& x : xs) {
    const std::size_t d = x->value.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      std::memcpy(out.data() + i * total + off, x->value.data() + i * d, d * sizeof(double));
    off += d;
  }
  std::vector<Node*> raw;
  std::vector<std::size_t> widths;
  for (const auto& x : xs) {
    raw.push_back(x.get());
    widths.push_back(x->value.dim(1));
  }
  return make_op(std::move(out), xs,
                 [raw = std::move(raw), widths = std::move(widths), n, total](Node& self) {
                   const double* g = self.grad.data();
                   std::size_t off = 0;
                   for (std::size_t p = 0; p < raw.size(); ++p) {
                     const std::size_t d = widths[p];
                     if (raw[p]->requires_grad) {
                       double* gx = raw[p]->grad_buf().data();
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * total + off + j];
                     }
                     off += d;
                   }
                 },
                 "concat_cols");
}

Var concat_rowvec(const Var& x, const Var& v) {
  require(x->value.rank() == 2, "concat_rowvec: x must be rank 2");
  require(v->value.rank() == 1, "concat_rowvec: v must be rank 1");
  const std::size_t n = x->value.dim(0), d = x->value.dim(1), dv = v->value.dim(0);
  Tensor out({n, d + dv});
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * (d + dv), x->value.data() + i * d, d * sizeof(double));
    std::memcpy(out.data() + i * (d + dv) + d, v->value.data(), dv * sizeof(double));
  }
  Node *px = x.get(), *pv = v.get();
  return make_op(std::move(out), {x, v},
                 [px, pv, n, d, dv](Node& self) {
                   const double* g = self.grad.data();
                   const std::size_t w = d + dv;
                   if (px->requires_grad) {
                     double* gx = px->grad_buf().data();
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * w + j];
                   }
                   if (pv->requires_grad) {
                     double* gv = pv->grad_buf().data();
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < dv; ++j) gv[j] += g[i * w + d + j];
                   }
                 },
                 "concat_rowvec");
}

Var rel_scores(const Var& q, const Var& table, int clip) {
  require(q->value.rank() == 2 && table->value.rank() == 2, "rel_scores: rank-2 inputs required");
  const std::size_t n = q->value.dim(0), dh = q->value.dim(1);
  require(table->value.dim(0) == static_cast<std::size_t>(2 * clip + 1) &&
              table->value.dim(1) == dh,
          "rel_scores: table shape mismatch");
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* qi = q->value.data() + i * dh;
    for (std::size_t j = 0; j < n; ++j) {
      const double* t = table->value.data() + rel_index(i, j, clip) * dh;
      double s = 0.0;
      for (std::size_t p = 0; p < dh; ++p) s += qi[p] * t[p];
      out.at(i, j) = s;
    }
  }
  Node *pq = q.get(), *pt = table.get();
  return make_op(std::move(out), {q, table},
                 [pq, pt, n, dh, clip](Node& self) {
                   const double* g = self.grad.data();
                   for (std::size_t i = 0; i < n; ++i) {
                     const double* qi = pq->value.data() + i * dh;
                     for (std::size_t j = 0; j < n; ++j) {
                       const double gij = g[i * n + j];
                       if (gij == 0.0) continue;
                       const std::size_t r = rel_index(i, j, clip);
                       const double* t = pt->value.data() + r * dh;
                       if (pq->requires_grad) {
                         double* gq = pq->grad_buf().data() + i * dh;
                         for (std::size_t p = 0; p < dh; ++p) gq[p] += gij * t[p];
                       }
                       if (pt->requires_grad) {
                         double* gt = pt->grad_buf().data() + r * dh;
                         for (std::size_t p = 0; p < dh; ++p) gt[p] += gij * qi[p];
                       }
                     }
                   }
                 },
                 "rel_scores");
}

Var attn_mix(const Var& w, const Var& v, Mask mask) {
  require(w->value.rank() == 2 && v->value.rank() == 2, "attn_mix: rank-2 inputs required");
  const std::size_t n = w->value.dim(0), d = v->value.dim(1);
  require(w->value.dim(1) == v->value.dim(0), "attn_mix: inner dimension mismatch");
  require(mask.size() == w->value.dim(1), "attn_mix: mask length mismatch");
  const std::size_t nk = w->value.dim(1);
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * d;
    const double* wi = w->value.data() + i * nk;
    for (std::size_t j = 0; j < nk; ++j) {
      if (!mask[j]) continue;
      const double wij = wi[j];
      const double* vj = v->value.data() + j * d;
      for (std::size_t p = 0; p < d; ++p) o[p] += wij * vj[p];
    }
  }
  Node *pw = w.get(), *pv = v.get();
  return make_op(std::move(out), {w, v},
                 [pw, pv, mask = std::move(mask), n, d, nk](Node& self) {
                   const double* g = self.grad.data();
                   for (std::size_t i = 0; i < n; ++i) {
                     const double* gi = g + i * d;
                     for (std::size_t j = 0; j < nk; ++j) {
                       if (!mask[j]) continue;
                       if (pw->requires_grad) {
                         const double* vj = pv->value.data() + j * d;
                         double s = 0.0;
                         for (std::size_t p = 0; p < d; ++p) s += gi[p] * vj[p];
                         pw->grad_buf().data()[i * nk + j] += s;
                       }
                       if (pv->requires_grad) {
                         const double wij = pw->value.data()[i * nk + j];
                         double* gv = pv->grad_buf().data() + j * d;
                         for (std::size_t p = 0; p < d; ++p) gv[p] += wij * gi[p];
                       }
                     }
                   }
                 },
                 "attn_mix");
}

Var rel_values(const Var& w, const Var& table, int clip, Mask mask) {
  require(w->value.rank() == 2 && table->value.rank() == 2, "rel_values: rank-2 inputs required");
  const std::size_t n = w->value.dim(0);
  require(w->value.dim(1) == n, "rel_values: weight matrix must be square");
  require(mask.size() == n, "rel_values: mask length mismatch");
  const std::size_t dh = table->value.dim(1);
  require(table->value.dim(0) == static_cast<std::size_t>(2 * clip + 1),
          "rel_values: table shape mismatch");
  Tensor out({n, dh});
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * dh;
    const double* wi = w->value.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      const double* t = table->value.data() + rel_index(i, j, clip) * dh;
      for (std::size_t p = 0; p < dh; ++p) o[p] += wi[j] * t[p];
    }
  }
  Node *pw = w.get(), *pt = table.get();
  return make_op(std::move(out), {w, table},
                 [pw, pt, mask = std::move(mask), n, dh, clip](Node& self) {
                   const double* g = self.grad.data();
                   for (std::size_t i = 0; i < n; ++i) {
                     const double* gi = g + i * dh;
                     for (std::size_t j = 0; j < n; ++j) {
                       if (!mask[j]) continue;
                       const std::size_t r = rel_index(i, j, clip);
                       if (pw->requires_grad) {
                         const double* t = pt->value.data() + r * dh;
                         double s = 0.0;
                         for (std::size_t p = 0; p < dh; ++p) s += gi[p] * t[p];
                         pw->grad_buf().data()[i * n + j] += s;
                       }
                       if (pt->requires_grad) {
                         const double wij = pw->value.data()[i * n + j];
                         double* gt = pt->grad_buf().data() + r * dh;
                         for (std::size_t p = 0; p < dh; ++p) gt[p] += wij * gi[p];
                       }
                     }
                   }
                 },
                 "rel_values");
}

Var zero_masked_rows(const Var& x, Mask mask) {
  require(x->value.rank() == 2, "zero_masked_rows: rank-2 input required");
  const std::size_t n = x->value.dim(0), d = x->value.dim(1);
  require(mask.size() == n, "zero_masked_rows: mask length mismatch");
  Tensor out = x->value;
  for (std::size_t i = 0; i < n; ++i)
    if (!mask[i])
      for (std::size_t j = 0; j < d; ++j) out.at(i, j) = 0.0;
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px, mask = std::move(mask), n, d](Node& self) {
                   const double* g = self.grad.data();
                   double* gx = px->grad_buf().data();
                   for (std::size_t i = 0; i < n; ++i) {
                     if (!mask[i]) continue;
                     for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j];
                   }
                 },
                 "zero_masked_rows");
}

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ValueError("dropout: rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x->value.shape());
  for (auto& m : mask.values()) m = unit_uniform(rng) >= rate ? keep_scale : 0.0;
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) *= mask.at(i);
  Node* px = x.get();
  return make_op(std::move(out), {x},
                 [px, mask = std::move(mask)](Node& self) {
                   const auto& g = self.grad.values();
                   auto& gx = px->grad_buf().values();
                   for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask.at(i);
                 },
                 "dropout");
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x->value.values()) s += v;
  Node* px = x.get();
  return make_op(Tensor::scalar(s), {x},
                 [px](Node& self) {
                   const double g = self.grad.at(0);
                   auto& gx = px->grad_buf().values();
                   for (auto& v : gx) v += g;
                 },
                 "sum_all");
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(w->value.rank() == 2, "linear: weight must be rank 2");
  const std::size_t dout = w->value.dim(0), din = w->value.dim(1);
  const bool vec = x->value.rank() == 1;
  require(x->value.cols() == din, "linear: input width mismatch");
  const std::size_t n = x->value.rows();
  if (b) require(b->value.rank() == 1 && b->value.dim(0) == dout, "linear: bias shape");
  Tensor out(vec ? std::vector<std::size_t>{dout} : std::vector<std::size_t>{n, dout});
  kernels::gemm_nt(x->value.data(), w->value.data(), out.data(), n, din, dout, false);
  if (b) {
    const double* bv = b->value.data();
    for (std::size_t i = 0; i < n; ++i) {
      double* row = out.data() + i * dout;
      for (std::size_t j = 0; j < dout; ++j) row[j] += bv[j];
    }
  }
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  Node *px = x.get(), *pw = w.get(), *pb = b ? b.get() : nullptr;
  return make_op(std::move(out), std::move(parents),
                 [px, pw, pb, n, din, dout](Node& self) {
                   const double* g = self.grad.data();
                   if (px->requires_grad)
                     kernels::gemm_nn(g, pw->value.data(), px->grad_buf().data(), n, dout, din,
                                      true);
                   if (pw->requires_grad)
                     kernels::gemm_tn(g, px->value.data(), pw->grad_buf().data(), dout, n, din,
                                      true);
                   if (pb && pb->requires_grad) {
                     double* gb = pb->grad_buf().data();
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < dout; ++j) gb[j] += g[i * dout + j];
                   }
                 },
                 "linear");
}

Var linear(const Var& x, const Var& w) { return linear(x, w, nullptr); }

Var ce_rows_sum(const Var& logits, std::vector<int> ids, Mask mask) {
  const std::size_t n = logits->value.rows(), c = logits->value.cols();
  require(ids.size() == n && mask.size() == n, "ce_rows_sum: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c)
      throw ValueError("ce_rows_sum: class id out of range");
    const double* z = logits->value.data() + i * c;
    double mx = z[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    loss += mx + std::log(sum) - z[ids[i]];
  }
  Node* pl = logits.get();
  return make_op(Tensor::scalar(loss), {logits},
                 [pl, ids = std::move(ids), mask = std::move(mask), n, c](Node& self) {
                   const double s = self.grad.at(0);
                   double* gz = pl->grad_buf().data();
                   for (std::size_t i = 0; i < n; ++i) {
                     if (!mask[i]) continue;
                     const double* z = pl->value.data() + i * c;
                     double mx = z[0];
                     for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
                     double sum = 0.0;
                     for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
                     for (std::size_t j = 0; j < c; ++j) {
                       double p = std::exp(z[j] - mx) / sum;
                       gz[i * c + j] += s * (p - (static_cast<std::size_t>(ids[i]) == j ? 1.0 : 0.0));
                     }
                   }
                 },
                 "ce_rows_sum");
}

Var ce_single(const Var& logits, int id) {
  require(logits->value.rank() == 1, "ce_single: rank-1 logits required");
  const std::size_t c = logits->value.dim(0);
  require(id >= 0 && static_cast<std::size_t>(id) < c, "ce_single: class id out of range");
  // One-row reuse of the masked sum keeps a single backward implementation.
  const double* z = logits->value.data();
  double mx = z[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
  const double loss = mx + std::log(sum) - z[id];
  Node* pl = logits.get();
  return make_op(Tensor::scalar(loss), {logits},
                 [pl, id, c](Node& self) {
                   const double s = self.grad.at(0);
                   const double* z = pl->value.data();
                   double mx = z[0];
                   for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
                   double sum = 0.0;
                   for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
                   double* gz = pl->grad_buf().data();
                   for (std::size_t j = 0; j < c; ++j) {
                     double p = std::exp(z[j] - mx) / sum;
                     gz[j] += s * (p - (static_cast<std::size_t>(id) == j ? 1.0 : 0.0));
                   }
                 },
                 "ce_single");
}

Var bce_logits_rows_sum(const Var& logits, std::vector<double> target_row, Mask mask) {
  const std::size_t n = logits->value.rows(), c = logits->value.cols();
  require(target_row.size() == c, "bce_logits_rows_sum: target width mismatch");
  require(mask.size() == n, "bce_logits_rows_sum: mask length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double* z = logits->value.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      // max(z,0) - z*y + log(1+exp(-|z|)) is the overflow-safe form.
      loss += std::max(z[j], 0.0) - z[j] * target_row[j] + std::log1p(std::exp(-std::abs(z[j])));
    }
  }
  Node* pl = logits.get();
  return make_op(Tensor::scalar(loss), {logits},
                 [pl, target_row = std::move(target_row), mask = std::move(mask), n, c](Node& self) {
                   const double s = self.grad.at(0);
                   double* gz = pl->grad_buf().data();
                   for (std::size_t i = 0; i < n; ++i) {
                     if (!mask[i]) continue;
                     const double* z = pl->value.data() + i * c;
                     for (std::size_t j = 0; j < c; ++j) {
                       const double sig = 1.0 / (1.0 + std::exp(-z[j]));
                       gz[i * c + j] += s * (sig - target_row[j]);
                     }
                   }
                 },
                 "bce_logits_rows_sum");
}

Var nll_probs_rows_sum(const Var& probs, std::vector<int> ids, Mask mask) {
  const std::size_t n = probs->value.rows(), c = probs->value.cols();
  require(ids.size() == n && mask.size() == n, "nll_probs_rows_sum: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= c)
      throw ValueError("nll_probs_rows_sum: class id out of range");
    loss -= std::log(probs->value.at(i, ids[i]));
  }
  Node* pp = probs.get();
  return make_op(Tensor::scalar(loss), {probs},
                 [pp, ids = std::move(ids), mask = std::move(mask), c](Node& self) {
                   const double s = self.grad.at(0);
                   double* gp = pp->grad_buf().data();
                   for (std::size_t i = 0; i < ids.size(); ++i) {
                     if (!mask[i]) continue;
                     const std::size_t idx = i * c + static_cast<std::size_t>(ids[i]);
                     gp[idx] -= s / pp->value.values()[idx];
                   }
                 },
                 "nll_probs_rows_sum");
}

}  // namespace ssran::ops
