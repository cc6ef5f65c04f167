#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "tsonet/core/autodiff.hpp"
#include "tsonet/core/ops.hpp"
#include "tsonet/core/rng.hpp"

namespace tsonet {

// Largest divisor of c not exceeding `desired` (norm groups for thin layers).
inline int64_t fit_groups(int64_t c, int64_t desired) {
    int64_t g = std::min(c, desired);
    while (g > 1 && c % g != 0) --g;
    return g;
}

// Scoped parameter factory: registration order = construction order, which
// pins both the init RNG stream and the checkpoint layout.
template <class T>
struct module_builder {
    ag::param_store<T>& store;
    rng& rg;
    std::string prefix;
    // statistic extent handed to every norm layer built in this scope
    bool norm_spatial_stats = true;

    module_builder scoped(const std::string& sub) const {
        return {store, rg, prefix + sub + ".", norm_spatial_stats};
    }

    ag::var<T> param(const std::string& name, tensor<T> init) {
        return store.add(prefix + name, std::move(init));
    }

    tensor<T> normal(std::vector<int64_t> shape, double stddev) {
        tensor<T> t(std::move(shape));
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rg.normal(0.0, stddev));
        return t;
    }

    tensor<T> kaiming(std::vector<int64_t> shape, int64_t fan_in) {
        return normal(std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in)));
    }
};

enum class conv_init { kaiming, zero };

template <class T>
struct conv2d_layer {
    ag::var<T> w, b;
    int64_t k = 1, pad = 0, groups = 1;

    conv2d_layer() = default;
    conv2d_layer(module_builder<T>& mb, const std::string& name, int64_t in_c, int64_t out_c,
                 int64_t k_, int64_t groups_ = 1, conv_init init = conv_init::kaiming)
        : k(k_), pad(k_ / 2), groups(groups_) {
        const int64_t fan_in = (in_c / groups) * k * k;
        tensor<T> wt = (init == conv_init::zero)
                           ? tensor<T>({out_c, in_c / groups, k, k})
                           : mb.kaiming({out_c, in_c / groups, k, k}, fan_in);
        w = mb.param(name + ".weight", std::move(wt));
        b = mb.param(name + ".bias", tensor<T>({out_c}));
    }

    ag::var<T> operator()(const ag::var<T>& x) const {
        return ag::conv2d(x, w, b, k, pad, groups);
    }
};

template <class T>
struct group_norm_layer {
    ag::var<T> gamma, beta;
    int64_t groups = 1;
    T eps = static_cast<T>(1e-5);
    bool spatial_stats = true;

    group_norm_layer() = default;
    group_norm_layer(module_builder<T>& mb, const std::string& name, int64_t channels,
                     int64_t desired_groups)
        : groups(fit_groups(channels, desired_groups)), spatial_stats(mb.norm_spatial_stats) {
        gamma = mb.param(name + ".gamma", tensor<T>({channels}, T(1)));
        beta = mb.param(name + ".beta", tensor<T>({channels}));
    }

    ag::var<T> operator()(const ag::var<T>& x) const {
        return ag::group_norm(x, gamma, beta, groups, eps, spatial_stats);
    }
};

template <class T>
struct linear_layer {
    ag::var<T> w, b; // w: [out, in]

    linear_layer() = default;
    linear_layer(module_builder<T>& mb, const std::string& name, int64_t in, int64_t out,
                 double weight_std = -1.0, double bias_init = 0.0) {
        tensor<T> wt = (weight_std < 0) ? mb.kaiming({out, in}, in)
                                        : mb.normal({out, in}, weight_std);
        w = mb.param(name + ".weight", std::move(wt));
        b = mb.param(name + ".bias", tensor<T>({out}, static_cast<T>(bias_init)));
    }

    // x: [rows, in] -> [rows, out]
    ag::var<T> operator()(const ag::var<T>& x) const {
        return ag::add_rowvec(ag::matmul(x, w, false, true), b);
    }
};

// conv3x3 -> norm -> gelu
template <class T>
struct conv_norm_act {
    conv2d_layer<T> conv;
    group_norm_layer<T> norm;

    conv_norm_act() = default;
    conv_norm_act(module_builder<T>& mb, const std::string& name, int64_t in_c, int64_t out_c,
                  int64_t k, int64_t norm_groups)
        : conv(mb, name + ".conv", in_c, out_c, k),
          norm(mb, name + ".norm", out_c, norm_groups) {}

    ag::var<T> operator()(const ag::var<T>& x) const { return ag::gelu(norm(conv(x))); }
};

// Pre-norm residual unit: x + conv3x3(gelu(norm(x))). The identity path keeps
// absolute activation scale flowing past the normalization, which the height
// readout depends on (normalizing the mainline folds whole-image statistics
// into every pixel).
template <class T>
struct residual_conv_unit {
    group_norm_layer<T> norm;
    conv2d_layer<T> conv;

    residual_conv_unit() = default;
    residual_conv_unit(module_builder<T>& mb, const std::string& name, int64_t channels,
                       int64_t norm_groups)
        : norm(mb, name + ".norm", channels, norm_groups),
          conv(mb, name + ".conv", channels, channels, 3) {}

    ag::var<T> operator()(const ag::var<T>& x) const {
        return ag::add(x, conv(ag::gelu(norm(x))));
    }
};

} // namespace tsonet
