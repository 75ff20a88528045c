// SPDX-License-Identifier: Apache-2.0
#include "ssran/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssran::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParThreshold = 1u << 16;

inline void row_nn(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate)
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
  const double* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n, bool accumulate) {
  const double* arow = a + i * k;
  double* crow = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double sum = 0.0;
    for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
    crow[j] = accumulate ? crow[j] + sum : sum;
  }
}

inline void row_tn(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n, std::size_t m, bool accumulate) {
  // C row i: sum over p of A[p][i] * B[p][:]
  double* crow = c + i * n;
  if (!accumulate)
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

namespace serial {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) row_nn(a, b, c, i, k, n, accumulate);
}
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) row_nt(a, b, c, i, k, n, accumulate);
}
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) row_tn(a, b, c, i, k, n, m, accumulate);
}
}  // namespace serial

namespace par {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
    row_nn(a, b, c, static_cast<std::size_t>(i), k, n, accumulate);
}
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
    row_nt(a, b, c, static_cast<std::size_t>(i), k, n, accumulate);
}
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i)
    row_tn(a, b, c, static_cast<std::size_t>(i), k, n, m, accumulate);
}
}  // namespace par

namespace {
inline bool go_parallel(std::size_t m, std::size_t k, std::size_t n) {
#ifdef _OPENMP
  return parallel_enabled() && m > 1 && m * k * n >= kParThreshold;
#else
  (void)m;
  (void)k;
  (void)n;
  return false;
#endif
}
}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (go_parallel(m, k, n))
    par::gemm_nn(a, b, c, m, k, n, accumulate);
  else
    serial::gemm_nn(a, b, c, m, k, n, accumulate);
}
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (go_parallel(m, k, n))
    par::gemm_nt(a, b, c, m, k, n, accumulate);
  else
    serial::gemm_nt(a, b, c, m, k, n, accumulate);
}
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (go_parallel(m, k, n))
    par::gemm_tn(a, b, c, m, k, n, accumulate);
  else
    serial::gemm_tn(a, b, c, m, k, n, accumulate);
}

}  // namespace ssran::kernels
