#include "fecl/contrastive.hpp"

#include <cmath>

#include "fecl/kernels.hpp"

namespace fecl {

Tensor project(const Tensor& h, const ProjectionHead& head) {
    if (h.rows() != 1 || head.w1.cols() != h.cols() || head.w2.cols() != head.w1.rows()) {
        throw ContractError("project: dimension mismatch (h " + h.shape_string() + ", w1 " +
                            head.w1.shape_string() + ", w2 " + head.w2.shape_string() + ")");
    }
    ad::NoGradGuard no_grad;
    return project(ad::constant(h), ad::constant(head.w1), ad::constant(head.w2)).value();
}

ad::Var project(const ad::Var& h, const ad::Var& w1, const ad::Var& w2) {
    return ad::matmul_nt(ad::relu(ad::matmul_nt(h, w1)), w2);
}

double nt_xent_loss(const ContrastiveBatch& batch) {
    ad::NoGradGuard no_grad;
    return ad::nt_xent(ad::constant(batch.projections), batch.temperature).item();
}

Tensor interleave_pairs(std::span<const std::pair<Tensor, Tensor>> pairs) {
    if (pairs.empty()) throw ContractError("interleave_pairs: no pairs");
    const std::size_t d = pairs.front().first.cols();
    Tensor out(2 * pairs.size(), d);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& [a, b] = pairs[k];
        if (a.size() != d || b.size() != d) throw ContractError("interleave_pairs: inconsistent widths");
        std::copy(a.data(), a.data() + d, out.row_span(2 * k).begin());
        std::copy(b.data(), b.data() + d, out.row_span(2 * k + 1).begin());
    }
    return out;
}

Tensor normalize_rows(const Tensor& rows) {
    Tensor out = rows;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        const double n = std::sqrt(squared_norm(row));
        if (n == 0.0) throw ContractError("normalize_rows: zero vector at row " + std::to_string(r));
        for (auto& x : row) x /= n;
    }
    return out;
}

double alignment_metric(std::span<const std::pair<Tensor, Tensor>> pairs, double exponent) {
    if (pairs.empty()) throw ContractError("alignment_metric: empty pair list");
    double total = 0.0;
    for (const auto& [a, b] : pairs) {
        if (a.size() != b.size()) throw ContractError("alignment_metric: length mismatch");
        const auto ua = normalize_rows(Tensor(1, a.size(), std::vector<double>(a.values().begin(), a.values().end())));
        const auto ub = normalize_rows(Tensor(1, b.size(), std::vector<double>(b.values().begin(), b.values().end())));
        double sq = 0.0;
        for (std::size_t i = 0; i < ua.size(); ++i) sq += (ua[i] - ub[i]) * (ua[i] - ub[i]);
        total += std::pow(std::sqrt(sq), exponent);
    }
    return total / static_cast<double>(pairs.size());
}

double uniformity_metric(const Tensor& embeddings, double t) {
    if (embeddings.rows() < 2) throw ContractError("uniformity_metric: need at least 2 embeddings");
    return std::log(kernels::mean_gaussian_potential(normalize_rows(embeddings), t));
}

}  // namespace fecl
