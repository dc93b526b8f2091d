#pragma once

// Dense inner-loop kernels behind the differentiable ops.
//
// Two builds of every kernel exist: `serial` is the reference, `omp` splits
// the outermost output loop across OpenMP threads. Each output element is
// accumulated in the same order by both, so results are bit-identical for
// any thread count. The graph ops call the `omp` variants, which fall back to
// serial execution below a work threshold.

#include <cstddef>
#include <span>
#include <vector>

namespace starnet::kernels {

// Flop count below which the omp variants do not open a parallel region.
inline constexpr std::size_t kParallelWorkThreshold = 1 << 15;

#define STARNET_KERNEL_DECLS                                                                      \
  /* C[m x n] (+)= A[m x k] * B[k x n] */                                                        \
  void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,            \
               std::span<const double> b, std::span<double> c, bool accumulate);                  \
  /* C[m x n] (+)= A[m x k] * B[n x k]^T */                                                      \
  void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,            \
               std::span<const double> b, std::span<double> c, bool accumulate);                  \
  /* C[m x n] (+)= A[p x m]^T * B[p x n] */                                                      \
  void gemm_tn(std::size_t p, std::size_t m, std::size_t n, std::span<const double> a,            \
               std::span<const double> b, std::span<double> c, bool accumulate);                  \
  /* Per-column maximum of M[rows x cols]; argmax keeps the lowest row on ties. */                \
  void colwise_max(std::size_t rows, std::size_t cols, std::span<const double> m,                 \
                   std::span<double> out, std::span<std::size_t> argmax);

namespace serial {
STARNET_KERNEL_DECLS
}  // namespace serial

namespace omp {
STARNET_KERNEL_DECLS
}  // namespace omp

#undef STARNET_KERNEL_DECLS

// Number of threads the omp variants may use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace starnet::kernels
