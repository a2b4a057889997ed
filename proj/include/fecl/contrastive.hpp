#pragma once

// Projection head, NT-Xent loss over dropout views, and the alignment /
// uniformity diagnostics on the unit hypersphere.

#include <span>
#include <utility>
#include <vector>

#include "fecl/autograd.hpp"
#include "fecl/tensor.hpp"

namespace fecl {

struct ProjectionHead {
    Tensor w1;  // d_h x d_m
    Tensor w2;  // d_c x d_h
};

/// w2 * relu(w1 * h) for a 1 x d_m row (no bias terms).
Tensor project(const Tensor& h, const ProjectionHead& head);
/// Row-wise projection inside a graph.
ad::Var project(const ad::Var& h, const ad::Var& w1, const ad::Var& w2);

struct ContrastiveBatch {
    Tensor projections;  // 2 N_b x d_c, rows 2k and 2k+1 are a positive pair
    double temperature = 0.07;
};

/// Mean of the per-row NT-Xent terms. Zero when the batch holds a single pair.
double nt_xent_loss(const ContrastiveBatch& batch);

/// Rows with interleaved positive pairs: [first_0, second_0, first_1, ...].
Tensor interleave_pairs(std::span<const std::pair<Tensor, Tensor>> pairs);

/// Mean ||u - v||^exponent over L2-normalized pairs.
double alignment_metric(std::span<const std::pair<Tensor, Tensor>> pairs, double exponent = 2.0);

/// log mean over unordered pairs of exp(-t ||u - v||^2) for L2-normalized rows.
double uniformity_metric(const Tensor& embeddings, double t = 2.0);

/// Copy of `rows` with every row scaled to unit length.
Tensor normalize_rows(const Tensor& rows);

}  // namespace fecl
