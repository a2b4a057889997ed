#include "fecl/fusion.hpp"

#include <array>

namespace fecl {

namespace {

void check_fusion_inputs(const Tensor& h, const Tensor& z, const Tensor& tokens, const AttentionParams& p) {
    if (tokens.rows() == 0) throw ContractError("fusion: no text tokens");
    const std::size_t d_m = h.cols();
    if (h.rows() != 1 || z.rows() != 1 || z.cols() != d_m || tokens.cols() != d_m) {
        throw ContractError("fusion: h, z and token widths disagree");
    }
    const std::size_t d_s = p.w_q.rows();
    for (const Tensor* w : {&p.w_q, &p.w_k, &p.w_v}) {
        if (w->rows() != d_s || w->cols() != d_m) {
            throw ContractError("fusion: projection " + w->shape_string() + " incompatible with d_m=" +
                                std::to_string(d_m));
        }
    }
}

FusedFeature run(FusionKind kind, const Tensor& h, const Tensor& z, const Tensor& tokens,
                 const AttentionParams& params) {
    check_fusion_inputs(h, z, tokens, params);
    ad::NoGradGuard no_grad;
    const auto g = fuse(kind, ad::constant(h), ad::constant(z), ad::constant(tokens), ad::constant(params.w_q),
                        ad::constant(params.w_k), ad::constant(params.w_v));
    return {g.feature.value(), g.attention.value()};
}

}  // namespace

FusionGraph fuse(FusionKind kind, const ad::Var& h, const ad::Var& z, const ad::Var& tokens, const ad::Var& w_q,
                 const ad::Var& w_k, const ad::Var& w_v) {
    if (tokens.rows() == 0) throw ContractError("fusion: no text tokens");
    const auto values = ad::matmul_nt(tokens, w_v);  // n x d_s
    ad::Var weights;
    ad::Var tail;
    if (kind == FusionKind::Attention) {
        const auto query = ad::matmul_nt(h, w_q);                              // 1 x d_s
        const auto keys = ad::matmul_nt(tokens, w_k);                          // n x d_s
        weights = ad::softmax_rows(ad::matmul_nt(query, keys));                // 1 x n
        tail = ad::matmul(weights, values);                                    // 1 x d_s
    } else {
        const auto n = tokens.rows();
        // Mean as a uniform weighting so both variants share one reduction path.
        weights = ad::constant(Tensor(1, n, 1.0 / static_cast<double>(n)));
        tail = ad::matmul(weights, values);
    }
    const std::array<ad::Var, 3> parts{h, z, tail};
    return {ad::concat_cols(parts), weights};
}

ad::Var classifier_logits(const ad::Var& feature, const ad::Var& w_o, const ad::Var& b_o) {
    return ad::add_row(ad::matmul_nt(feature, w_o), b_o);
}

FusedFeature attend_fuse(const Tensor& h, const Tensor& z, const Tensor& tokens, const AttentionParams& params) {
    return run(FusionKind::Attention, h, z, tokens, params);
}

FusedFeature concat_fuse(const Tensor& h, const Tensor& z, const Tensor& tokens, const AttentionParams& params) {
    return run(FusionKind::Concat, h, z, tokens, params);
}

Tensor classify(const FusedFeature& f, const ClassifierParams& params) {
    if (f.vector.rows() != 1 || params.w_o.cols() != f.vector.cols() || params.b_o.rows() != 1 ||
        params.b_o.cols() != params.w_o.rows()) {
        throw ContractError("classify: dimension mismatch (f " + f.vector.shape_string() + ", W_o " +
                            params.w_o.shape_string() + ", b_o " + params.b_o.shape_string() + ")");
    }
    ad::NoGradGuard no_grad;
    return ad::softmax_rows(
               classifier_logits(ad::constant(f.vector), ad::constant(params.w_o), ad::constant(params.b_o)))
        .value();
}

}  // namespace fecl
