#pragma once

// Minimal reverse-mode differentiation over Tensor values.
//
// Ops evaluate eagerly and, while gradient recording is enabled, remember
// their inputs and a backward closure. `backward(loss)` walks the graph in
// reverse topological order and accumulates into every node that requires a
// gradient. Parameters are long-lived leaves; intermediate nodes die with the
// last Var that references them.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fecl/random.hpp"
#include "fecl/tensor.hpp"

namespace fecl::ad {

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    Tensor& grad_buffer() {
        if (grad.empty() && !value.empty()) grad = Tensor(value.rows(), value.cols());
        return grad;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad_buffer() { return node_->grad_buffer(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    std::size_t rows() const { return node_->value.rows(); }
    std::size_t cols() const { return node_->value.cols(); }
    /// Scalar value of a 1x1 node.
    double item() const;
    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Parameters keyed by a stable dotted name, in registration order.
struct NamedParameter {
    std::string name;
    Var var;
};
using ParameterList = std::vector<NamedParameter>;

/// Leaf that never receives a gradient.
Var constant(Tensor value);
/// Leaf that accumulates a gradient.
Var parameter(Tensor value);

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Back-propagates from a 1x1 root with seed gradient 1.
void backward(const Var& root);

// Linear algebra
Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // broadcast a 1 x d row over every row of a
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var detach(const Var& a);

// Elementwise / rowwise
Var relu(const Var& a);
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
/// Inverted dropout: kept entries are scaled by 1 / (1 - p). Identity when p == 0.
Var dropout(const Var& a, double p, Rng& rng);

// Shape
Var gather_rows(const Var& table, std::span<const int> ids);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var mean_rows(const Var& a);

// Reductions to 1x1
Var sum(const Var& a);
Var sum_squares(const Var& a);
/// Sum over rows of -log softmax(logits)[label].
Var cross_entropy_with_logits(const Var& logits, std::span<const int> labels);
/// Mean NT-Xent loss over the rows of `projections`; rows 2k and 2k+1 are positive partners.
Var nt_xent(const Var& projections, double temperature);

}  // namespace fecl::ad
