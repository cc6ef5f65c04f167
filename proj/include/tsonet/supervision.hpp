#pragma once

#include "tsonet/core/error.hpp"
#include "tsonet/core/kernels.hpp"
#include "tsonet/core/tensor.hpp"

namespace tsonet {

// Training-time supervision derived from the reference height map: binary
// footprint, eroded interior, and the spatial weight map used by the height
// loss. Pure functions of the label; computed once per sample.
struct supervision_pack {
    tensor<float> footprint; // FP, {0,1}
    tensor<float> interior;  // I,  {0,1}, I <= FP pointwise
    tensor<float> weights;   // W,  {alpha_outer, 1}
    float tau_fp = 2.0f;
    float alpha_outer = 0.1f;
};

// FP = 1(h > tau_fp), strict inequality.
inline tensor<float> derive_footprint_mask(const tensor<float>& heights, float tau_fp) {
    tensor<float> fp(heights.shape());
    for (int64_t i = 0; i < heights.numel(); ++i)
        fp[i] = heights[i] > tau_fp ? 1.0f : 0.0f;
    return fp;
}

// I = 1 - MaxPool3x3(1 - FP), stride 1, same size. The pool input (1 - FP) is
// zero padded, i.e. outside the image counts as building interior, so
// footprints touching the border are not eroded by the frame.
inline tensor<float> erode_footprint(const tensor<float>& fp) {
    check_contract(fp.rank() == 2, "erode_footprint: FP must be [H,W]");
    tensor<float> inv(fp.shape());
    for (int64_t i = 0; i < fp.numel(); ++i) {
        check_contract(fp[i] == 0.0f || fp[i] == 1.0f, "erode_footprint: FP must be binary");
        inv[i] = 1.0f - fp[i];
    }
    tensor<float> pooled(fp.shape());
    kern::maxpool3x3_s1(inv, pooled);
    tensor<float> interior(fp.shape());
    for (int64_t i = 0; i < fp.numel(); ++i) interior[i] = 1.0f - pooled[i];
    return interior;
}

// W = I + alpha_outer * (1 - I): interior pixels weigh 1, everything else
// alpha_outer.
inline tensor<float> build_weight_map(const tensor<float>& interior, float alpha_outer) {
    if (!(alpha_outer > 0.0f && alpha_outer <= 1.0f))
        throw config_error("alpha_outer must be in (0, 1]");
    tensor<float> w(interior.shape());
    for (int64_t i = 0; i < interior.numel(); ++i) {
        check_contract(interior[i] == 0.0f || interior[i] == 1.0f,
                       "build_weight_map: I must be binary");
        w[i] = interior[i] + alpha_outer * (1.0f - interior[i]);
    }
    return w;
}

inline supervision_pack derive_supervision(const tensor<float>& heights,
                                           float tau_fp = 2.0f, float alpha_outer = 0.1f) {
    supervision_pack s;
    s.tau_fp = tau_fp;
    s.alpha_outer = alpha_outer;
    s.footprint = derive_footprint_mask(heights, tau_fp);
    s.interior = erode_footprint(s.footprint);
    s.weights = build_weight_map(s.interior, alpha_outer);
    return s;
}

} // namespace tsonet
