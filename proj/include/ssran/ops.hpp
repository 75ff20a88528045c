// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "ssran/autograd.hpp"

// Differentiable primitives. Shapes are validated up front and every
// result passes a finiteness check. Masked variants never read values at
// masked positions, so padding can hold arbitrary finite garbage without
// influencing any unmasked output bit.

namespace ssran::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// [n x d] + [d], the bias/broadcast add.
Var add_rowvec(const Var& x, const Var& v);

/// C = A * B with A [m x k], B [k x n].
Var matmul(const Var& a, const Var& b);
/// C = A * B^T with A [m x k], B [n x k].
Var matmul_nt(const Var& a, const Var& b);

Var relu(const Var& x);
Var sigmoid(const Var& x);

/// Row-wise softmax over the last axis. Rank-1 input acts as one row.
Var softmax_rows(const Var& x);

/// Row-wise softmax over unmasked columns only; masked columns are exactly
/// zero in the output and are never read. Throws if every column is masked.
Var masked_softmax_rows(const Var& x, Mask mask);

/// Per-row normalization over the last axis, then elementwise affine.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// Arithmetic mean over unmasked rows -> [d]. Throws if no row is unmasked.
Var mean_pool_rows(const Var& x, Mask mask);

/// Row gather: out[i] = table[ids[i]].
Var embedding_rows(const Var& table, std::vector<int> ids);

Var slice_cols(const Var& x, std::size_t start, std::size_t len);
Var concat_cols(const std::vector<Var>& xs);

/// Appends the same vector to every row: out[i] = x[i] (+) v.
Var concat_rowvec(const Var& x, const Var& v);

/// Relative-position score term: S[i][j] = q[i] . table[clamp(j-i)+clip].
Var rel_scores(const Var& q, const Var& table, int clip);

/// out[i] = sum over unmasked j of w[i][j] * v[j]. Masked columns of w are
/// expected to be zero and are skipped outright.
Var attn_mix(const Var& w, const Var& v, Mask mask);

/// Relative-position value term: out[i] = sum_j w[i][j] * table[clamp(j-i)+clip].
Var rel_values(const Var& w, const Var& table, int clip, Mask mask);

/// Copies x with masked rows forced to zero vectors.
Var zero_masked_rows(const Var& x, Mask mask);

/// Inverted dropout; training-time only (callers skip it in eval).
Var dropout(const Var& x, double rate, std::mt19937_64& rng);

Var sum_all(const Var& x);

/// y = x W^T (+ b) with W [d_out x d_in]. Rank-1 x is a single row and
/// yields a rank-1 result.
Var linear(const Var& x, const Var& w, const Var& b);
Var linear(const Var& x, const Var& w);

/// Token-level cross entropy, summed over unmasked rows.
Var ce_rows_sum(const Var& logits, std::vector<int> ids, Mask mask);
/// Cross entropy of a single logit vector against one class id.
Var ce_single(const Var& logits, int id);
/// Binary cross entropy on logits; every unmasked row is scored against the
/// same 0/1 target vector. Summed over rows and classes.
Var bce_logits_rows_sum(const Var& logits, std::vector<double> target_row, Mask mask);
/// Negative log likelihood taking probabilities (not logits), summed over
/// unmasked rows.
Var nll_probs_rows_sum(const Var& probs, std::vector<int> ids, Mask mask);

}  // namespace ssran::ops
