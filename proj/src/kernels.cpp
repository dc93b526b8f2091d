#include "starnet/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace starnet::kernels {
namespace {

// Row kernels: each computes one output row. Both builds call these, so the
// per-element accumulation order is shared.

inline void row_nn(std::size_t i, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
                   bool accumulate) {
  double* ci = c + i * n;
  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  }
  const double* ai = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ai[p];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void row_nt(std::size_t i, std::size_t k, std::size_t n, const double* a, const double* b, double* c,
                   bool accumulate) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
    ci[j] = accumulate ? ci[j] + s : s;
  }
}

inline void row_tn(std::size_t i, std::size_t p_count, std::size_t m, std::size_t n, const double* a,
                   const double* b, double* c, bool accumulate) {
  double* ci = c + i * n;
  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  }
  for (std::size_t p = 0; p < p_count; ++p) {
    const double av = a[p * m + i];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
  }
}

inline void col_max(std::size_t j, std::size_t rows, std::size_t cols, const double* m, double* out,
                    std::size_t* argmax) {
  std::size_t best = 0;
  double v = m[j];
  for (std::size_t r = 1; r < rows; ++r) {
    const double x = m[r * cols + j];
    if (x > v) {
      v = x;
      best = r;
    }
  }
  out[j] = v;
  argmax[j] = best;
}

}  // namespace

namespace serial {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) row_nn(i, k, n, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) row_nt(i, k, n, a.data(), b.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t p, std::size_t m, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) row_tn(i, p, m, n, a.data(), b.data(), c.data(), accumulate);
}

void colwise_max(std::size_t rows, std::size_t cols, std::span<const double> m, std::span<double> out,
                 std::span<std::size_t> argmax) {
  for (std::size_t j = 0; j < cols; ++j) col_max(j, rows, cols, m.data(), out.data(), argmax.data());
}

}  // namespace serial

namespace omp {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWorkThreshold)
  for (std::int64_t i = 0; i < rows; ++i) {
    row_nn(static_cast<std::size_t>(i), k, n, a.data(), b.data(), c.data(), accumulate);
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWorkThreshold)
  for (std::int64_t i = 0; i < rows; ++i) {
    row_nt(static_cast<std::size_t>(i), k, n, a.data(), b.data(), c.data(), accumulate);
  }
}

void gemm_tn(std::size_t p, std::size_t m, std::size_t n, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (p * m * n >= kParallelWorkThreshold)
  for (std::int64_t i = 0; i < rows; ++i) {
    row_tn(static_cast<std::size_t>(i), p, m, n, a.data(), b.data(), c.data(), accumulate);
  }
}

void colwise_max(std::size_t rows, std::size_t cols, std::span<const double> m, std::span<double> out,
                 std::span<std::size_t> argmax) {
  const auto ncols = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWorkThreshold)
  for (std::int64_t j = 0; j < ncols; ++j) {
    col_max(static_cast<std::size_t>(j), rows, cols, m.data(), out.data(), argmax.data());
  }
}

}  // namespace omp

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace starnet::kernels
