#pragma once

// Dense kernels used by the autograd ops and the diagnostics.
//
// Every kernel exists twice: a plain serial reference in `serial::` and an
// OpenMP version in `parallel::`. Parallel versions split work over output
// rows only and keep the per-element accumulation order of the reference, so
// both produce bit-identical results. The unqualified entry points dispatch
// to the parallel version once the work is large enough to amortize a fork.

#include <cstddef>

#include "fecl/tensor.hpp"

namespace fecl::kernels {

namespace serial {
// c (+)= a * b
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
// c (+)= a * b^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
// c (+)= a^T * b
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
// out(i, j) = cos(x_i, x_j); rows of x must be nonzero
Tensor pairwise_cosine(const Tensor& x);
// mean over unordered pairs i < j of exp(-t * ||x_i - x_j||^2)
double mean_gaussian_potential(const Tensor& x, double t);
}  // namespace serial

namespace parallel {
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
Tensor pairwise_cosine(const Tensor& x);
double mean_gaussian_potential(const Tensor& x, double t);
}  // namespace parallel

/// Multiply-add count above which the dispatchers switch to OpenMP.
inline constexpr std::size_t kParallelWorkThreshold = std::size_t{1} << 16;

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
Tensor pairwise_cosine(const Tensor& x);
double mean_gaussian_potential(const Tensor& x, double t);

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace fecl::kernels
