#pragma once

// Fusion of the masked-sentence feature h with the joint encoding (z, Z),
// and the stance classifier on top of the fused feature.

#include "fecl/autograd.hpp"
#include "fecl/tensor.hpp"

namespace fecl {

struct AttentionParams {
    Tensor w_q;  // d_s x d_m
    Tensor w_k;  // d_s x d_m
    Tensor w_v;  // d_s x d_m
};

struct ClassifierParams {
    Tensor w_o;  // d_p x (2 d_m + d_s)
    Tensor b_o;  // 1 x d_p
};

struct FusedFeature {
    Tensor vector;     // 1 x (2 d_m + d_s): h | z | pooled token values
    Tensor attention;  // 1 x n weights over the text tokens
};

enum class FusionKind { Attention, Concat };

/// Retrieval attention: h queries the token states, f = h | z | sum_j a_j W_v Z_j.
FusedFeature attend_fuse(const Tensor& h, const Tensor& z, const Tensor& tokens, const AttentionParams& params);
/// Uniform pooling in place of attention: f = h | z | mean_j W_v Z_j.
FusedFeature concat_fuse(const Tensor& h, const Tensor& z, const Tensor& tokens, const AttentionParams& params);
/// softmax(W_o f + b_o).
Tensor classify(const FusedFeature& f, const ClassifierParams& params);

struct FusionGraph {
    ad::Var feature;
    ad::Var attention;
};

FusionGraph fuse(FusionKind kind, const ad::Var& h, const ad::Var& z, const ad::Var& tokens, const ad::Var& w_q,
                 const ad::Var& w_k, const ad::Var& w_v);
ad::Var classifier_logits(const ad::Var& feature, const ad::Var& w_o, const ad::Var& b_o);

}  // namespace fecl
