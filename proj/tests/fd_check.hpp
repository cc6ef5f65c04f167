#pragma once

// Central finite-difference gradient checking against the autodiff engine.
// Double precision only: step 1e-5 keeps truncation and roundoff both below
// the 1e-4 relative-error budget.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tsonet/core/autodiff.hpp"
#include "tsonet/core/rng.hpp"

namespace fdtest {

using tsonet::tensor;
namespace ag = tsonet::ag;

struct fd_report {
    double max_rel_err = 0.0;
    std::string where;
};

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

// leaves: nodes whose gradients are checked. scalar_fn rebuilds the graph from
// current leaf values and returns the scalar root.
inline fd_report check_gradients(const std::vector<ag::var<double>>& leaves,
                                 const std::function<ag::var<double>()>& scalar_fn,
                                 double step = 1e-5) {
    // Analytic pass.
    for (auto& l : leaves) l->zero_grad();
    auto root = scalar_fn();
    const double f0 = std::abs(root->value[0]);
    // Differences below the central-difference noise floor carry no signal;
    // a genuine gradient bug shows up far above it on same-path parameters.
    const double atol = std::max(1e-9, 1e-8 * std::max(1.0, f0));
    ag::backward(root, 1.0);

    std::vector<tensor<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& l : leaves) {
        l->ensure_grad();
        analytic.push_back(l->grad);
    }

    fd_report rep;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& l = leaves[li];
        for (int64_t i = 0; i < l->value.numel(); ++i) {
            const double orig = l->value[i];
            l->value[i] = orig + step;
            const double fp = scalar_fn()->value[0];
            l->value[i] = orig - step;
            const double fm = scalar_fn()->value[0];
            l->value[i] = orig;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[li][i];
            if (std::abs(fd - an) < atol) continue;
            const double e = rel_err(fd, an);
            if (e > rep.max_rel_err) {
                rep.max_rel_err = e;
                rep.where = (leaves[li]->name.empty() ? "leaf" + std::to_string(li)
                                                      : leaves[li]->name) +
                            "[" + std::to_string(i) + "] fd=" + std::to_string(fd) +
                            " an=" + std::to_string(an);
            }
        }
    }
    return rep;
}

inline tensor<double> random_tensor(std::vector<int64_t> shape, tsonet::rng& rg,
                                    double lo = -1.0, double hi = 1.0) {
    tensor<double> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rg.uniform(lo, hi);
    return t;
}

} // namespace fdtest
