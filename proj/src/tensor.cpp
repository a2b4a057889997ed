#include "fecl/tensor.hpp"

#include <cmath>

namespace fecl {

double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool all_finite(const Tensor& t) {
    for (double x : t.values()) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace fecl
