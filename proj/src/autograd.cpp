#include "fecl/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "fecl/kernels.hpp"

namespace fecl::ad {

namespace {

thread_local bool g_grad_enabled = true;

Var make_result(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> bw) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& v : inputs) any = any || v.requires_grad();
        if (any) {
            node->requires_grad = true;
            for (const auto& v : inputs) node->inputs.push_back(v.node());
            node->backward = std::move(bw);
        }
    }
    return Var(std::move(node));
}

Var make_result(Tensor value, std::span<const Var> inputs, std::function<void(Node&)> bw) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& v : inputs) any = any || v.requires_grad();
        if (any) {
            node->requires_grad = true;
            for (const auto& v : inputs) node->inputs.push_back(v.node());
            node->backward = std::move(bw);
        }
    }
    return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value())) {
        throw ContractError(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                            b.value().shape_string());
    }
}

void axpy(Tensor& dst, const Tensor& src, double s = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

double Var::item() const {
    if (value().size() != 1) throw ContractError("item: not a scalar (" + value().shape_string() + ")");
    return value()[0];
}

void Var::zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
    if (!root.defined() || root.value().size() != 1) throw ContractError("backward: root must be 1x1");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS yields a topological order (inputs before users).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

Var matmul(const Var& a, const Var& b) {
    Tensor out(a.rows(), b.cols());
    kernels::gemm_nn(a.value(), b.value(), out);
    return make_result(std::move(out), {a, b}, [](Node& n) {
        auto& a = *n.inputs[0];
        auto& b = *n.inputs[1];
        if (a.requires_grad) kernels::gemm_nt(n.grad, b.value, a.grad_buffer(), true);
        if (b.requires_grad) kernels::gemm_tn(a.value, n.grad, b.grad_buffer(), true);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    Tensor out(a.rows(), b.rows());
    kernels::gemm_nt(a.value(), b.value(), out);
    return make_result(std::move(out), {a, b}, [](Node& n) {
        auto& a = *n.inputs[0];
        auto& b = *n.inputs[1];
        if (a.requires_grad) kernels::gemm_nn(n.grad, b.value, a.grad_buffer(), true);
        if (b.requires_grad) kernels::gemm_tn(n.grad, a.value, b.grad_buffer(), true);
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    axpy(out, b.value());
    return make_result(std::move(out), {a, b}, [](Node& n) {
        for (auto& in : n.inputs) {
            if (in->requires_grad) axpy(in->grad_buffer(), n.grad);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    axpy(out, b.value(), -1.0);
    return make_result(std::move(out), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->grad_buffer(), n.grad);
        if (n.inputs[1]->requires_grad) axpy(n.inputs[1]->grad_buffer(), n.grad, -1.0);
    });
}

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ContractError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                            row.value().shape_string());
    }
    Tensor out = a.value();
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += row.value()[c];
    }
    return make_result(std::move(out), {a, row}, [](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->grad_buffer(), n.grad);
        if (n.inputs[1]->requires_grad) {
            auto& g = n.inputs[1]->grad_buffer();
            for (std::size_t r = 0; r < n.grad.rows(); ++r) {
                for (std::size_t c = 0; c < n.grad.cols(); ++c) g[c] += n.grad(r, c);
            }
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& x : out.values()) x *= s;
    return make_result(std::move(out), {a}, [s](Node& n) { axpy(n.inputs[0]->grad_buffer(), n.grad, s); });
}

Var detach(const Var& a) { return constant(a.value()); }

Var relu(const Var& a) {
    Tensor out = a.value();
    for (auto& x : out.values()) x = x > 0.0 ? x : 0.0;
    return make_result(std::move(out), {a}, [](Node& n) {
        auto& in = *n.inputs[0];
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (in.value[i] > 0.0) g[i] += n.grad[i];
        }
    });
}

Var softmax_rows(const Var& a) {
    Tensor out(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto in = a.value().row_span(r);
        auto dst = out.row_span(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = std::exp(in[c] - mx);
            total += dst[c];
        }
        for (auto& x : dst) x /= total;
    }
    return make_result(std::move(out), {a}, [](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < n.value.rows(); ++r) {
            const auto y = n.value.row_span(r);
            const auto gy = n.grad.row_span(r);
            const double inner = dot(y, gy);
            auto dst = g.row_span(r);
            for (std::size_t c = 0; c < y.size(); ++c) dst[c] += y[c] * (gy[c] - inner);
        }
    });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
    const std::size_t d = a.cols();
    if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
        throw ContractError("layer_norm_rows: gain/bias must be 1x" + std::to_string(d));
    }
    Tensor normalized(a.rows(), d);
    std::vector<double> inv_std(a.rows());
    Tensor out(a.rows(), d);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto x = a.value().row_span(r);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            normalized(r, c) = (x[c] - mean) * inv_std[r];
            out(r, c) = normalized(r, c) * gain.value()[c] + bias.value()[c];
        }
    }
    return make_result(std::move(out), {a, gain, bias},
                       [normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& n) {
                           auto& in = *n.inputs[0];
                           auto& gain = *n.inputs[1];
                           auto& bias = *n.inputs[2];
                           const std::size_t d = n.value.cols();
                           const double inv_d = 1.0 / static_cast<double>(d);
                           for (std::size_t r = 0; r < n.value.rows(); ++r) {
                               const auto g = n.grad.row_span(r);
                               const auto xhat = normalized.row_span(r);
                               if (gain.requires_grad) {
                                   auto& gg = gain.grad_buffer();
                                   for (std::size_t c = 0; c < d; ++c) gg[c] += g[c] * xhat[c];
                               }
                               if (bias.requires_grad) {
                                   auto& gb = bias.grad_buffer();
                                   for (std::size_t c = 0; c < d; ++c) gb[c] += g[c];
                               }
                               if (in.requires_grad) {
                                   double mean_dx = 0.0, mean_dx_xhat = 0.0;
                                   std::vector<double> dxhat(d);
                                   for (std::size_t c = 0; c < d; ++c) {
                                       dxhat[c] = g[c] * gain.value[c];
                                       mean_dx += dxhat[c];
                                       mean_dx_xhat += dxhat[c] * xhat[c];
                                   }
                                   mean_dx *= inv_d;
                                   mean_dx_xhat *= inv_d;
                                   auto dst = in.grad_buffer().row_span(r);
                                   for (std::size_t c = 0; c < d; ++c) {
                                       dst[c] += inv_std[r] * (dxhat[c] - mean_dx - xhat[c] * mean_dx_xhat);
                                   }
                               }
                           }
                       });
}

Var dropout(const Var& a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
    if (p == 0.0) return a;
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor mask(a.rows(), a.cols());
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        mask[i] = uniform01(rng) < p ? 0.0 : keep_scale;
        out[i] *= mask[i];
    }
    return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * mask[i];
    });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
    const std::size_t d = table.cols();
    Tensor out(ids.size(), d);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= table.rows()) {
            throw ContractError("gather_rows: id " + std::to_string(ids[r]) + " out of range");
        }
        const auto src = table.value().row_span(static_cast<std::size_t>(ids[r]));
        std::copy(src.begin(), src.end(), out.row_span(r).begin());
    }
    std::vector<int> kept(ids.begin(), ids.end());
    return make_result(std::move(out), {table}, [kept = std::move(kept)](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < kept.size(); ++r) {
            auto dst = g.row_span(static_cast<std::size_t>(kept[r]));
            const auto src = n.grad.row_span(r);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
    });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.rows()) throw ContractError("slice_rows: range out of bounds");
    const std::size_t d = a.cols();
    Tensor out(count, d);
    std::copy(a.value().data() + begin * d, a.value().data() + (begin + count) * d, out.data());
    return make_result(std::move(out), {a}, [begin](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        const std::size_t d = n.grad.cols();
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[begin * d + i] += n.grad[i];
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.cols()) throw ContractError("slice_cols: range out of bounds");
    Tensor out(a.rows(), count);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < count; ++c) out(r, c) = a.value()(r, begin + c);
    }
    return make_result(std::move(out), {a}, [begin](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < n.grad.rows(); ++r) {
            for (std::size_t c = 0; c < n.grad.cols(); ++c) g(r, begin + c) += n.grad(r, c);
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ContractError("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Tensor out(rows, cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p.value()(r, c);
        }
        offset += p.cols();
    }
    return make_result(std::move(out), parts, [](Node& n) {
        std::size_t offset = 0;
        for (auto& in : n.inputs) {
            const std::size_t w = in->value.cols();
            if (in->requires_grad) {
                auto& g = in->grad_buffer();
                for (std::size_t r = 0; r < n.grad.rows(); ++r) {
                    for (std::size_t c = 0; c < w; ++c) g(r, c) += n.grad(r, offset + c);
                }
            }
            offset += w;
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ContractError("concat_rows: column count mismatch");
        rows += p.rows();
    }
    Tensor out(rows, cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + offset * cols);
        offset += p.rows();
    }
    return make_result(std::move(out), parts, [](Node& n) {
        std::size_t offset = 0;
        const std::size_t cols = n.grad.cols();
        for (auto& in : n.inputs) {
            if (in->requires_grad) {
                auto& g = in->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[offset * cols + i];
            }
            offset += in->value.rows();
        }
    });
}

Var mean_rows(const Var& a) {
    if (a.rows() == 0) throw ContractError("mean_rows: empty input");
    Tensor out(1, a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out[c] += a.value()(r, c);
    }
    const double inv = 1.0 / static_cast<double>(a.rows());
    for (auto& x : out.values()) x *= inv;
    return make_result(std::move(out), {a}, [inv](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) += inv * n.grad[c];
        }
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double x : a.value().values()) s += x;
    return make_result(Tensor(1, 1, s), {a}, [](Node& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (auto& x : g.values()) x += n.grad[0];
    });
}

Var sum_squares(const Var& a) {
    return make_result(Tensor(1, 1, squared_norm(a.value().values())), {a}, [](Node& n) {
        auto& in = *n.inputs[0];
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * in.value[i] * n.grad[0];
    });
}

Var cross_entropy_with_logits(const Var& logits, std::span<const int> labels) {
    if (labels.size() != logits.rows()) throw ContractError("cross_entropy_with_logits: label count mismatch");
    Tensor probs(logits.rows(), logits.cols());
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto z = logits.value().row_span(r);
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= z.size()) {
            throw ContractError("cross_entropy_with_logits: label out of range");
        }
        const double mx = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < z.size(); ++c) probs(r, c) = std::exp(z[c] - lse);
        total += lse - z[static_cast<std::size_t>(labels[r])];
    }
    std::vector<int> kept(labels.begin(), labels.end());
    return make_result(Tensor(1, 1, total), {logits},
                       [probs = std::move(probs), kept = std::move(kept)](Node& n) {
                           auto& g = n.inputs[0]->grad_buffer();
                           const double up = n.grad[0];
                           for (std::size_t r = 0; r < probs.rows(); ++r) {
                               for (std::size_t c = 0; c < probs.cols(); ++c) {
                                   const double target = static_cast<int>(c) == kept[r] ? 1.0 : 0.0;
                                   g(r, c) += up * (probs(r, c) - target);
                               }
                           }
                       });
}

Var nt_xent(const Var& projections, double temperature) {
    if (!(temperature > 0.0)) throw ContractError("nt_xent: temperature must be positive");
    const std::size_t m = projections.rows();
    if (m < 2 || m % 2 != 0) throw ContractError("nt_xent: row count must be even and >= 2");

    const Tensor& p = projections.value();
    const std::size_t d = p.cols();
    std::vector<double> norms(m);
    Tensor unit(m, d);
    for (std::size_t i = 0; i < m; ++i) {
        norms[i] = std::sqrt(squared_norm(p.row_span(i)));
        if (norms[i] == 0.0) throw ContractError("nt_xent: zero-norm projection at row " + std::to_string(i));
        for (std::size_t c = 0; c < d; ++c) unit(i, c) = p(i, c) / norms[i];
    }
    Tensor sim(m, m);
    kernels::gemm_nt(unit, unit, sim);
    for (auto& x : sim.values()) x /= temperature;

    // Row-wise softmax over j != i, kept for the backward pass.
    Tensor soft(m, m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t partner = i ^ 1U;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i) mx = std::max(mx, sim(i, j));
        }
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            soft(i, j) = std::exp(sim(i, j) - mx);
            s += soft(i, j);
        }
        for (std::size_t j = 0; j < m; ++j) soft(i, j) /= s;
        total += mx + std::log(s) - sim(i, partner);
    }
    const double loss = total / static_cast<double>(m);

    return make_result(
        Tensor(1, 1, loss), {projections},
        [unit = std::move(unit), soft = std::move(soft), norms = std::move(norms), temperature](Node& n) {
            const std::size_t m = unit.rows(), d = unit.cols();
            const double up = n.grad[0] / static_cast<double>(m);
            Tensor g_sim(m, m);  // dL/dS, S = U U^T / tau
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) continue;
                    g_sim(i, j) = up * (soft(i, j) - (j == (i ^ 1U) ? 1.0 : 0.0));
                }
            }
            Tensor sym(m, m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) sym(i, j) = (g_sim(i, j) + g_sim(j, i)) / temperature;
            }
            Tensor g_unit(m, d);
            kernels::gemm_nn(sym, unit, g_unit);
            auto& g = n.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
                const double radial = dot(unit.row_span(i), g_unit.row_span(i));
                for (std::size_t c = 0; c < d; ++c) {
                    g(i, c) += (g_unit(i, c) - unit(i, c) * radial) / norms[i];
                }
            }
        });
}

}  // namespace fecl::ad
