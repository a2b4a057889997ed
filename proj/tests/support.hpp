#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include <unistd.h>

#include "fecl/autograd.hpp"
#include "fecl/random.hpp"
#include "fecl/tensor.hpp"

namespace fecl::testing {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Tensor t(rows, cols);
    for (auto& x : t.values()) x = scale * standard_normal(rng);
    return t;
}

/// |a - n| / max(|a|, |n|, floor); the floor keeps vanishing gradients from
/// turning rounding noise into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
    double max_error = 0.0;
    std::size_t checked = 0;
};

/// Compares d loss / d param against central differences on up to
/// `max_entries` entries of `param` (all entries when the tensor is smaller).
/// `loss` must rebuild the graph on every call and be deterministic.
inline GradCheck check_gradient(ad::Var param, const std::function<ad::Var()>& loss, std::size_t max_entries,
                                Rng& rng, double step = 1e-5) {
    param.zero_grad();
    ad::backward(loss());
    const Tensor analytic = param.grad();
    GradCheck result;
    const std::size_t n = param.value().size();
    for (std::size_t k = 0; k < std::min(n, max_entries); ++k) {
        const std::size_t i = n <= max_entries ? k : static_cast<std::size_t>(uniform_index(rng, n));
        const double saved = param.value()[i];
        double plus = 0.0, minus = 0.0;
        {
            ad::NoGradGuard no_grad;
            param.mutable_value()[i] = saved + step;
            plus = loss().item();
            param.mutable_value()[i] = saved - step;
            minus = loss().item();
        }
        param.mutable_value()[i] = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        result.max_error = std::max(result.max_error, relative_error(analytic[i], numeric));
        ++result.checked;
    }
    return result;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("fecl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace fecl::testing
