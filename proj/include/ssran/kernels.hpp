// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. Each comes in a serial reference
// form and an OpenMP form; both walk elements in the same order per output
// row, so results are bit-identical for any thread count. The dispatch
// functions pick the OpenMP path when it is enabled and the problem is
// large enough to pay for the fork.

namespace ssran::kernels {

/// Enables/disables the OpenMP paths at runtime (default: enabled).
void set_parallel(bool enabled);
bool parallel_enabled();

namespace serial {
// C[m x n] = A[m x k] * B[k x n]      (accumulate: +=)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
}  // namespace serial

namespace par {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
}  // namespace par

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

}  // namespace ssran::kernels
