#include <doctest.h>

#include "fecl/kernels.hpp"
#include "support.hpp"

using namespace fecl;
using fecl::testing::random_tensor;

namespace {

Tensor naive_product(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    }
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("serial gemm variants agree with a naive triple loop") {
    Rng rng(1);
    const auto a = random_tensor(7, 5, rng);
    const auto b = random_tensor(5, 4, rng);
    const auto expected = naive_product(a, b);

    Tensor c(7, 4);
    kernels::serial::gemm_nn(a, b, c, false);
    CHECK(max_abs_diff(c, expected) < 1e-12);

    Tensor c_nt(7, 4);
    kernels::serial::gemm_nt(a, transpose(b), c_nt, false);
    CHECK(max_abs_diff(c_nt, expected) < 1e-12);

    Tensor c_tn(7, 4);
    kernels::serial::gemm_tn(transpose(a), b, c_tn, false);
    CHECK(max_abs_diff(c_tn, expected) < 1e-12);
}

TEST_CASE("accumulate adds to the existing output") {
    Rng rng(2);
    const auto a = random_tensor(3, 3, rng);
    const auto b = random_tensor(3, 3, rng);
    Tensor c(3, 3, 1.0);
    kernels::gemm_nn(a, b, c, true);
    const auto p = naive_product(a, b);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(p[i] + 1.0).epsilon(1e-12));
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    Rng rng(3);
    for (const auto& [m, k, n] : {std::tuple{1, 1, 1}, {3, 17, 2}, {64, 33, 40}, {129, 64, 65}}) {
        const auto a = random_tensor(m, k, rng);
        const auto b = random_tensor(k, n, rng);
        const auto bt = random_tensor(n, k, rng);
        const auto at = random_tensor(k, m, rng);
        Tensor s(m, n, 0.5), p(m, n, 0.5);
        kernels::serial::gemm_nn(a, b, s, true);
        kernels::parallel::gemm_nn(a, b, p, true);
        CHECK(s == p);
        kernels::serial::gemm_nt(a, bt, s, false);
        kernels::parallel::gemm_nt(a, bt, p, false);
        CHECK(s == p);
        kernels::serial::gemm_tn(at, b, s, false);
        kernels::parallel::gemm_tn(at, b, p, false);
        CHECK(s == p);
    }
    const auto x = random_tensor(50, 8, rng);
    CHECK(kernels::serial::pairwise_cosine(x) == kernels::parallel::pairwise_cosine(x));
    CHECK(kernels::serial::mean_gaussian_potential(x, 2.0) == kernels::parallel::mean_gaussian_potential(x, 2.0));
}

TEST_CASE("pairwise cosine and gaussian potential match direct formulas") {
    Rng rng(4);
    const auto x = random_tensor(6, 3, rng);
    const auto cos = kernels::pairwise_cosine(x);
    double potential = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            const double c = dot(x.row_span(i), x.row_span(j)) /
                             std::sqrt(squared_norm(x.row_span(i)) * squared_norm(x.row_span(j)));
            CHECK(cos(i, j) == doctest::Approx(c).epsilon(1e-12));
            if (i < j) {
                double d2 = 0.0;
                for (std::size_t c2 = 0; c2 < 3; ++c2) d2 += (x(i, c2) - x(j, c2)) * (x(i, c2) - x(j, c2));
                potential += std::exp(-2.0 * d2);
                ++pairs;
            }
        }
    }
    CHECK(kernels::mean_gaussian_potential(x, 2.0) == doctest::Approx(potential / pairs).epsilon(1e-12));
}

TEST_CASE("kernel shape mismatches are contract errors") {
    Tensor a(2, 3), b(4, 2), c(2, 2);
    CHECK_THROWS_AS(kernels::gemm_nn(a, b, c), ContractError);
    CHECK_THROWS_AS(kernels::mean_gaussian_potential(Tensor(1, 3), 2.0), ContractError);
}

TEST_CASE("tensor helpers") {
    const auto t = Tensor::row({3.0, 4.0});
    CHECK(squared_norm(t.values()) == 25.0);
    CHECK(dot(t.values(), t.values()) == 25.0);
    CHECK(all_finite(t));
    CHECK_FALSE(all_finite(Tensor::row({1.0, std::nan("")})));
    CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1.0}), ContractError);
    CHECK(Tensor::identity(2)(1, 1) == 1.0);
    CHECK(Tensor::identity(2)(0, 1) == 0.0);
}
