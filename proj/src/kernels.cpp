#include "fecl/kernels.hpp"

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fecl::kernels {

namespace {

void check_nn(const Tensor& a, const Tensor& b, const Tensor& c) {
    if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
        throw ContractError("gemm_nn: shape mismatch " + a.shape_string() + " * " + b.shape_string() +
                            " -> " + c.shape_string());
    }
}

void check_nt(const Tensor& a, const Tensor& b, const Tensor& c) {
    if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
        throw ContractError("gemm_nt: shape mismatch " + a.shape_string() + " * " + b.shape_string() +
                            "^T -> " + c.shape_string());
    }
}

void check_tn(const Tensor& a, const Tensor& b, const Tensor& c) {
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
        throw ContractError("gemm_tn: shape mismatch " + a.shape_string() + "^T * " + b.shape_string() +
                            " -> " + c.shape_string());
    }
}

// Row kernels shared by both variants so the accumulation order is identical.

inline void nn_row(const Tensor& a, const Tensor& b, Tensor& c, std::size_t i, bool accumulate) {
    const std::size_t k_dim = a.cols(), n = b.cols();
    double* out = c.data() + i * n;
    if (!accumulate) std::fill(out, out + n, 0.0);
    const double* arow = a.data() + i * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
        const double aik = arow[k];
        const double* brow = b.data() + k * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
}

inline void nt_row(const Tensor& a, const Tensor& b, Tensor& c, std::size_t i, bool accumulate) {
    const std::size_t k_dim = a.cols(), n = b.rows();
    const double* arow = a.data() + i * k_dim;
    double* out = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b.data() + j * k_dim;
        double s = 0.0;
        for (std::size_t k = 0; k < k_dim; ++k) s += arow[k] * brow[k];
        out[j] = accumulate ? out[j] + s : s;
    }
}

inline void tn_row(const Tensor& a, const Tensor& b, Tensor& c, std::size_t i, bool accumulate) {
    const std::size_t k_dim = a.rows(), m = a.cols(), n = b.cols();
    double* out = c.data() + i * n;
    if (!accumulate) std::fill(out, out + n, 0.0);
    for (std::size_t k = 0; k < k_dim; ++k) {
        const double aki = a.data()[k * m + i];
        const double* brow = b.data() + k * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += aki * brow[j];
    }
}

std::vector<double> inverse_norms(const Tensor& x) {
    std::vector<double> inv(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double n = std::sqrt(squared_norm(x.row_span(i)));
        if (n == 0.0) throw ContractError("pairwise_cosine: zero-norm row " + std::to_string(i));
        inv[i] = 1.0 / n;
    }
    return inv;
}

inline void cosine_row(const Tensor& x, const std::vector<double>& inv, Tensor& out, std::size_t i) {
    const std::size_t d = x.cols();
    const double* xi = x.data() + i * d;
    for (std::size_t j = 0; j < x.rows(); ++j) {
        const double* xj = x.data() + j * d;
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += xi[k] * xj[k];
        out(i, j) = s * inv[i] * inv[j];
    }
}

inline double potential_row(const Tensor& x, double t, std::size_t i) {
    const std::size_t d = x.cols();
    const double* xi = x.data() + i * d;
    double acc = 0.0;
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
        const double* xj = x.data() + j * d;
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = xi[k] - xj[k];
            sq += diff * diff;
        }
        acc += std::exp(-t * sq);
    }
    return acc;
}

double finish_potential(const std::vector<double>& partial, std::size_t n) {
    double total = 0.0;
    for (double p : partial) total += p;
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return total / pairs;
}

void check_potential(const Tensor& x) {
    if (x.rows() < 2) throw ContractError("mean_gaussian_potential: need at least 2 rows");
}

}  // namespace

namespace serial {

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    check_nn(a, b, c);
    for (std::size_t i = 0; i < a.rows(); ++i) nn_row(a, b, c, i, accumulate);
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    check_nt(a, b, c);
    for (std::size_t i = 0; i < a.rows(); ++i) nt_row(a, b, c, i, accumulate);
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    check_tn(a, b, c);
    for (std::size_t i = 0; i < a.cols(); ++i) tn_row(a, b, c, i, accumulate);
}

Tensor pairwise_cosine(const Tensor& x) {
    const auto inv = inverse_norms(x);
    Tensor out(x.rows(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) cosine_row(x, inv, out, i);
    return out;
}

double mean_gaussian_potential(const Tensor& x, double t) {
    check_potential(x);
    std::vector<double> partial(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) partial[i] = potential_row(x, t, i);
    return finish_potential(partial, x.rows());
}

}  // namespace serial

namespace parallel {

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    check_nn(a, b, c);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) nn_row(a, b, c, static_cast<std::size_t>(i), accumulate);
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    check_nt(a, b, c);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) nt_row(a, b, c, static_cast<std::size_t>(i), accumulate);
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    check_tn(a, b, c);
    const auto rows = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) tn_row(a, b, c, static_cast<std::size_t>(i), accumulate);
}

Tensor pairwise_cosine(const Tensor& x) {
    const auto inv = inverse_norms(x);
    Tensor out(x.rows(), x.rows());
    const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) cosine_row(x, inv, out, static_cast<std::size_t>(i));
    return out;
}

double mean_gaussian_potential(const Tensor& x, double t) {
    check_potential(x);
    std::vector<double> partial(x.rows());
    const auto rows = static_cast<std::ptrdiff_t>(x.rows());
    // Triangular rows: dynamic schedule balances the shrinking tail.
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        partial[static_cast<std::size_t>(i)] = potential_row(x, t, static_cast<std::size_t>(i));
    }
    return finish_potential(partial, x.rows());
}

}  // namespace parallel

namespace {
bool worth_parallel(std::size_t work) { return work >= kParallelWorkThreshold && max_threads() > 1; }
}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    if (worth_parallel(a.rows() * a.cols() * b.cols())) {
        parallel::gemm_nn(a, b, c, accumulate);
    } else {
        serial::gemm_nn(a, b, c, accumulate);
    }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    if (worth_parallel(a.rows() * a.cols() * b.rows())) {
        parallel::gemm_nt(a, b, c, accumulate);
    } else {
        serial::gemm_nt(a, b, c, accumulate);
    }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
    if (worth_parallel(a.rows() * a.cols() * b.cols())) {
        parallel::gemm_tn(a, b, c, accumulate);
    } else {
        serial::gemm_tn(a, b, c, accumulate);
    }
}

Tensor pairwise_cosine(const Tensor& x) {
    if (worth_parallel(x.rows() * x.rows() * x.cols())) return parallel::pairwise_cosine(x);
    return serial::pairwise_cosine(x);
}

double mean_gaussian_potential(const Tensor& x, double t) {
    if (worth_parallel(x.rows() * x.rows() * x.cols() / 2)) return parallel::mean_gaussian_potential(x, t);
    return serial::mean_gaussian_potential(x, t);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace fecl::kernels
