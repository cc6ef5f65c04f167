#pragma once

#include <cmath>
#include <vector>

#include "tsonet/core/autodiff.hpp"

namespace tsonet {

struct clip_result {
    double pre_norm = 0.0;
    double post_norm = 0.0;
    bool clipped = false;
};

// Global L2 gradient clipping across all parameters.
template <class T>
clip_result clip_global_grad_norm(ag::param_store<T>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params.list) {
        p->ensure_grad();
        for (int64_t i = 0; i < p->grad.numel(); ++i) {
            const double g = static_cast<double>(p->grad[i]);
            sq += g * g;
        }
    }
    clip_result r;
    r.pre_norm = std::sqrt(sq);
    r.post_norm = r.pre_norm;
    if (r.pre_norm > max_norm && r.pre_norm > 0.0) {
        const T scale = static_cast<T>(max_norm / r.pre_norm);
        double sq2 = 0.0;
        for (auto& p : params.list)
            for (int64_t i = 0; i < p->grad.numel(); ++i) {
                p->grad[i] *= scale;
                const double g = static_cast<double>(p->grad[i]);
                sq2 += g * g;
            }
        r.post_norm = std::sqrt(sq2);
        r.clipped = true;
    }
    return r;
}

// AdamW with decoupled weight decay:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
template <class T>
class adamw_optimizer {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    explicit adamw_optimizer(double weight_decay_ = 0.01) : weight_decay(weight_decay_) {}

    void step(ag::param_store<T>& params, double lr) {
        if (m_.empty()) {
            for (auto& p : params.list) {
                m_.emplace_back(p->value.shape());
                v_.emplace_back(p->value.shape());
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (size_t pi = 0; pi < params.list.size(); ++pi) {
            auto& p = *params.list[pi];
            p.ensure_grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (int64_t i = 0; i < p.value.numel(); ++i) {
                const double g = static_cast<double>(p.grad[i]);
                const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * g;
                const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps);
                const double pv = static_cast<double>(p.value[i]);
                p.value[i] = static_cast<T>(pv - lr * update - lr * weight_decay * pv);
            }
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    std::vector<tensor<T>> m_, v_;
    int64_t t_ = 0;
};

} // namespace tsonet
