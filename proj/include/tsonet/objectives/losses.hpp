#pragma once

#include "tsonet/core/error.hpp"
#include "tsonet/core/ops.hpp"

namespace tsonet {

// Loss hyperparameters. Defaults are the study's settings.
struct loss_config {
    float tau_fp = 2.0f;      // footprint threshold, meters
    float alpha_outer = 0.1f; // weight outside the eroded interior
    float alpha_t = 0.7f;     // Tversky false-negative coefficient
    float beta_t = 0.3f;      // Tversky false-positive coefficient
    float lambda_bce = 1.0f;
    float lambda_f = 1.0f;
    float epsilon = 1e-3f;

    void validate() const {
        if (!(tau_fp > 0 && alpha_t > 0 && beta_t > 0 && lambda_bce > 0 && lambda_f >= 0 &&
              epsilon > 0))
            throw config_error("loss config: all coefficients must be positive");
        if (!(alpha_outer > 0 && alpha_outer <= 1))
            throw config_error("loss config: alpha_outer must be in (0,1]");
    }
};

// Spatially weighted masked L1:
//   sum_i v_i w_i |h_hat_i - h_i| / (sum_i v_i w_i + eps)
// The denominator is a constant of the predictions, so scaling W by any
// positive constant leaves the loss unchanged up to eps effects.
template <class T>
ag::var<T> weighted_l1_loss(const ag::var<T>& h_hat, const tensor<T>& h,
                            const tensor<T>& v, const tensor<T>& w, T eps) {
    check_contract(h_hat->value.numel() == h.numel() && h.numel() == v.numel() &&
                       v.numel() == w.numel(),
                   "weighted_l1_loss: size mismatch");
    tensor<T> vw(h.shape());
    double denom = 0.0;
    for (int64_t i = 0; i < h.numel(); ++i) {
        vw[i] = v[i] * w[i];
        denom += static_cast<double>(vw[i]);
    }
    auto num = ag::sum_all(ag::mul_const(ag::abs_op(ag::sub_const(h_hat, h)), std::move(vw)));
    return ag::mul_scalar(num, static_cast<T>(1.0 / (denom + static_cast<double>(eps))));
}

// Plain masked L1 (uniform weights): the height-only training objective.
template <class T>
ag::var<T> masked_l1_loss(const ag::var<T>& h_hat, const tensor<T>& h,
                          const tensor<T>& v, T eps) {
    tensor<T> ones(h.shape(), T(1));
    return weighted_l1_loss(h_hat, h, v, ones, eps);
}

// Tversky loss over foreground probabilities:
//   1 - (sum v p f + eps) / (sum v [p f + a f (1-p) + b (1-f) p] + eps)
template <class T>
ag::var<T> tversky_loss(const ag::var<T>& p_hat, const tensor<T>& f,
                        const tensor<T>& v, T alpha_t, T beta_t, T eps) {
    check_contract(p_hat->value.numel() == f.numel() && f.numel() == v.numel(),
                   "tversky_loss: size mismatch");
    tensor<T> vf(f.shape());
    tensor<T> den_coef(f.shape());
    double const_term = 0.0;
    for (int64_t i = 0; i < f.numel(); ++i) {
        vf[i] = v[i] * f[i];
        const_term += static_cast<double>(alpha_t) * static_cast<double>(vf[i]);
        den_coef[i] = v[i] * (f[i] * (T(1) - alpha_t) + beta_t * (T(1) - f[i]));
    }
    auto num = ag::add_scalar(ag::sum_all(ag::mul_const(p_hat, std::move(vf))), eps);
    auto den = ag::add_scalar(ag::sum_all(ag::mul_const(p_hat, std::move(den_coef))),
                              static_cast<T>(const_term) + eps);
    return ag::rsub_scalar(ag::div(num, den), T(1));
}

// Masked binary cross-entropy with eps inside the logs and the denominator:
//   - sum v [f log(p+eps) + (1-f) log(1-p+eps)] / (sum v + eps)
template <class T>
ag::var<T> bce_loss(const ag::var<T>& p_hat, const tensor<T>& f,
                    const tensor<T>& v, T eps) {
    check_contract(p_hat->value.numel() == f.numel() && f.numel() == v.numel(),
                   "bce_loss: size mismatch");
    tensor<T> vf(f.shape());
    tensor<T> vnf(f.shape());
    double vsum = 0.0;
    for (int64_t i = 0; i < f.numel(); ++i) {
        vf[i] = v[i] * f[i];
        vnf[i] = v[i] * (T(1) - f[i]);
        vsum += static_cast<double>(v[i]);
    }
    auto pos = ag::mul_const(ag::log_op(ag::add_scalar(p_hat, eps)), std::move(vf));
    auto neg = ag::mul_const(ag::log_op(ag::add_scalar(ag::rsub_scalar(p_hat, T(1)), eps)),
                             std::move(vnf));
    auto s = ag::sum_all(ag::add(pos, neg));
    return ag::mul_scalar(s, static_cast<T>(-1.0 / (vsum + static_cast<double>(eps))));
}

// L = L_h + lambda_f (L_tver + lambda_bce L_bce)
template <class T>
ag::var<T> total_loss(const ag::var<T>& l_h, const ag::var<T>& l_tver,
                      const ag::var<T>& l_bce, T lambda_f, T lambda_bce) {
    auto l_f = ag::add(l_tver, ag::mul_scalar(l_bce, lambda_bce));
    return ag::add(l_h, ag::mul_scalar(l_f, lambda_f));
}

} // namespace tsonet
