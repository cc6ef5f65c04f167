#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tsonet/core/error.hpp"
#include "tsonet/core/tensor.hpp"

namespace tsonet::kern {

template <class T>
using emat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using emap = Eigen::Map<emat<T>>;
template <class T>
using ecmap = Eigen::Map<const emat<T>>;

// C[M,N] (+)= opA(A) * opB(B); A is [ar,ac] row-major, transposed when ta.
template <class T>
void gemm(bool accumulate,
          const T* a, int64_t ar, int64_t ac, bool ta,
          const T* b, int64_t br, int64_t bc, bool tb,
          T* c) {
    const int64_t m = ta ? ac : ar;
    const int64_t k = ta ? ar : ac;
    const int64_t k2 = tb ? bc : br;
    const int64_t n = tb ? br : bc;
    check_contract(k == k2, "gemm: inner dimensions do not match");
    ecmap<T> ma(a, ar, ac);
    ecmap<T> mb(b, br, bc);
    emap<T> mc(c, m, n);
    if (!ta && !tb) {
        if (accumulate) mc.noalias() += ma * mb; else mc.noalias() = ma * mb;
    } else if (!ta && tb) {
        if (accumulate) mc.noalias() += ma * mb.transpose(); else mc.noalias() = ma * mb.transpose();
    } else if (ta && !tb) {
        if (accumulate) mc.noalias() += ma.transpose() * mb; else mc.noalias() = ma.transpose() * mb;
    } else {
        if (accumulate) mc.noalias() += ma.transpose() * mb.transpose();
        else mc.noalias() = ma.transpose() * mb.transpose();
    }
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, square kernel, zero padding) via im2col + GEMM.
// Weight layout: [out_c, in_c/groups, k, k]; input [in_c, H, W].
// ---------------------------------------------------------------------------

template <class T>
void im2col(const T* x, int64_t channels, int64_t h, int64_t w,
            int64_t k, int64_t pad, T* col) {
    // col is [channels*k*k, h*w]
    const int64_t hw = h * w;
    for (int64_t c = 0; c < channels; ++c) {
        for (int64_t ky = 0; ky < k; ++ky) {
            for (int64_t kx = 0; kx < k; ++kx) {
                T* dst = col + ((c * k + ky) * k + kx) * hw;
                const int64_t dy = ky - pad, dx = kx - pad;
                for (int64_t y = 0; y < h; ++y) {
                    const int64_t sy = y + dy;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst + y * w, dst + (y + 1) * w, T(0));
                        continue;
                    }
                    const T* src = x + (c * h + sy) * w;
                    for (int64_t xx = 0; xx < w; ++xx) {
                        const int64_t sx = xx + dx;
                        dst[y * w + xx] = (sx >= 0 && sx < w) ? src[sx] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, int64_t channels, int64_t h, int64_t w,
                int64_t k, int64_t pad, T* x) {
    const int64_t hw = h * w;
    for (int64_t c = 0; c < channels; ++c) {
        for (int64_t ky = 0; ky < k; ++ky) {
            for (int64_t kx = 0; kx < k; ++kx) {
                const T* src = col + ((c * k + ky) * k + kx) * hw;
                const int64_t dy = ky - pad, dx = kx - pad;
                for (int64_t y = 0; y < h; ++y) {
                    const int64_t sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    T* dst = x + (c * h + sy) * w;
                    for (int64_t xx = 0; xx < w; ++xx) {
                        const int64_t sx = xx + dx;
                        if (sx >= 0 && sx < w) dst[sx] += src[y * w + xx];
                    }
                }
            }
        }
    }
}

template <class T>
std::vector<T>& conv_scratch() {
    thread_local std::vector<T> buf;
    return buf;
}

// Depthwise 3x3, stride 1, pad 1 (hot path: grouped conv with groups == C).
template <class T>
void depthwise3x3_fwd(const T* x, const T* w, const T* b,
                      int64_t channels, int64_t h, int64_t wd, T* y) {
    for (int64_t c = 0; c < channels; ++c) {
        const T* xc = x + c * h * wd;
        const T* wc = w + c * 9;
        const T bias = b ? b[c] : T(0);
        T* yc = y + c * h * wd;
        for (int64_t yy = 0; yy < h; ++yy) {
            for (int64_t xx = 0; xx < wd; ++xx) {
                T acc = bias;
                for (int64_t ky = 0; ky < 3; ++ky) {
                    const int64_t sy = yy + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int64_t kx = 0; kx < 3; ++kx) {
                        const int64_t sx = xx + kx - 1;
                        if (sx < 0 || sx >= wd) continue;
                        acc += wc[ky * 3 + kx] * xc[sy * wd + sx];
                    }
                }
                yc[yy * wd + xx] = acc;
            }
        }
    }
}

template <class T>
void depthwise3x3_bwd(const T* x, const T* w, const T* gy,
                      int64_t channels, int64_t h, int64_t wd,
                      T* gx, T* gw, T* gb) {
    for (int64_t c = 0; c < channels; ++c) {
        const T* xc = x + c * h * wd;
        const T* wc = w + c * 9;
        const T* gyc = gy + c * h * wd;
        T* gxc = gx ? gx + c * h * wd : nullptr;
        T* gwc = gw ? gw + c * 9 : nullptr;
        for (int64_t yy = 0; yy < h; ++yy) {
            for (int64_t xx = 0; xx < wd; ++xx) {
                const T g = gyc[yy * wd + xx];
                if (gb) gb[c] += g;
                for (int64_t ky = 0; ky < 3; ++ky) {
                    const int64_t sy = yy + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int64_t kx = 0; kx < 3; ++kx) {
                        const int64_t sx = xx + kx - 1;
                        if (sx < 0 || sx >= wd) continue;
                        if (gwc) gwc[ky * 3 + kx] += g * xc[sy * wd + sx];
                        if (gxc) gxc[sy * wd + sx] += g * wc[ky * 3 + kx];
                    }
                }
            }
        }
    }
}

template <class T>
void conv2d_fwd(const tensor<T>& x, const tensor<T>& w, const tensor<T>& b,
                int64_t k, int64_t pad, int64_t groups, tensor<T>& y) {
    const int64_t in_c = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int64_t out_c = w.dim(0);
    const int64_t hw = h * wd;
    const int64_t icg = in_c / groups, ocg = out_c / groups;
    check_contract(in_c % groups == 0 && out_c % groups == 0,
                   "conv2d: channels not divisible by groups");

    if (k == 3 && groups == in_c && groups == out_c) {
        depthwise3x3_fwd(x.data(), w.data(), b.numel() ? b.data() : nullptr,
                         in_c, h, wd, y.data());
        return;
    }

    const T* bsrc = nullptr;
    std::vector<T>* col = nullptr;
    if (k > 1) {
        col = &conv_scratch<T>();
        col->resize(static_cast<size_t>(icg * k * k * hw));
    }
    for (int64_t g = 0; g < groups; ++g) {
        if (k == 1) {
            bsrc = x.data() + g * icg * hw;
        } else {
            im2col(x.data() + g * icg * hw, icg, h, wd, k, pad, col->data());
            bsrc = col->data();
        }
        gemm<T>(false,
                w.data() + g * ocg * icg * k * k, ocg, icg * k * k, false,
                bsrc, icg * k * k, hw, false,
                y.data() + g * ocg * hw);
    }
    if (b.numel()) {
        for (int64_t c = 0; c < out_c; ++c) {
            T* yc = y.data() + c * hw;
            const T bias = b[c];
            for (int64_t i = 0; i < hw; ++i) yc[i] += bias;
        }
    }
}

// Accumulates into gx/gw/gb (callers pass zeroed or running buffers).
template <class T>
void conv2d_bwd(const tensor<T>& x, const tensor<T>& w, const tensor<T>& gy,
                int64_t k, int64_t pad, int64_t groups,
                tensor<T>* gx, tensor<T>* gw, tensor<T>* gb) {
    const int64_t in_c = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int64_t out_c = w.dim(0);
    const int64_t hw = h * wd;
    const int64_t icg = in_c / groups, ocg = out_c / groups;

    if (gb) {
        for (int64_t c = 0; c < out_c; ++c) {
            const T* gyc = gy.data() + c * hw;
            T acc(0);
            for (int64_t i = 0; i < hw; ++i) acc += gyc[i];
            (*gb)[c] += acc;
        }
    }

    if (k == 3 && groups == in_c && groups == out_c) {
        depthwise3x3_bwd(x.data(), w.data(), gy.data(), in_c, h, wd,
                         gx ? gx->data() : static_cast<T*>(nullptr),
                         gw ? gw->data() : static_cast<T*>(nullptr),
                         static_cast<T*>(nullptr));
        return;
    }

    std::vector<T>* col = nullptr;
    std::vector<T> gcol;
    if (k > 1) {
        col = &conv_scratch<T>();
        col->resize(static_cast<size_t>(icg * k * k * hw));
        if (gx) gcol.resize(static_cast<size_t>(icg * k * k * hw));
    }
    for (int64_t g = 0; g < groups; ++g) {
        const T* xg = x.data() + g * icg * hw;
        const T* gyg = gy.data() + g * ocg * hw;
        const T* wg = w.data() + g * ocg * icg * k * k;
        const T* bsrc = xg;
        if (k > 1) {
            im2col(xg, icg, h, wd, k, pad, col->data());
            bsrc = col->data();
        }
        if (gw) {
            // gW = gY * colT
            gemm<T>(true, gyg, ocg, hw, false, bsrc, icg * k * k, hw, true,
                    gw->data() + g * ocg * icg * k * k);
        }
        if (gx) {
            if (k == 1) {
                gemm<T>(true, wg, ocg, icg, true, gyg, ocg, hw, false,
                        gx->data() + g * icg * hw);
            } else {
                gemm<T>(false, wg, ocg, icg * k * k, true, gyg, ocg, hw, false,
                        gcol.data());
                col2im_add(gcol.data(), icg, h, wd, k, pad, gx->data() + g * icg * hw);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

template <class T>
void maxpool2_fwd(const tensor<T>& x, tensor<T>& y, std::vector<int32_t>& argmax) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t ho = h / 2, wo = w / 2;
    argmax.resize(static_cast<size_t>(c * ho * wo));
    for (int64_t ci = 0; ci < c; ++ci) {
        const T* xc = x.data() + ci * h * w;
        T* yc = y.data() + ci * ho * wo;
        int32_t* am = argmax.data() + ci * ho * wo;
        for (int64_t yo = 0; yo < ho; ++yo) {
            for (int64_t xo = 0; xo < wo; ++xo) {
                const int64_t base = (2 * yo) * w + 2 * xo;
                T best = xc[base];
                int32_t bi = static_cast<int32_t>(base);
                const int64_t cands[3] = {base + 1, base + w, base + w + 1};
                for (int64_t cand : cands) {
                    if (xc[cand] > best) { best = xc[cand]; bi = static_cast<int32_t>(cand); }
                }
                yc[yo * wo + xo] = best;
                am[yo * wo + xo] = bi;
            }
        }
    }
}

template <class T>
void maxpool2_bwd(const tensor<T>& gy, const std::vector<int32_t>& argmax,
                  int64_t h, int64_t w, tensor<T>& gx) {
    const int64_t c = gx.dim(0);
    const int64_t ho = h / 2, wo = w / 2;
    for (int64_t ci = 0; ci < c; ++ci) {
        const T* gyc = gy.data() + ci * ho * wo;
        const int32_t* am = argmax.data() + ci * ho * wo;
        T* gxc = gx.data() + ci * h * w;
        for (int64_t i = 0; i < ho * wo; ++i) gxc[am[i]] += gyc[i];
    }
}

// 3x3 stride-1 max pool with zero padding (supervision only, no gradients).
template <class T>
void maxpool3x3_s1(const tensor<T>& x, tensor<T>& y) {
    const int64_t h = x.dim(0), w = x.dim(1);
    for (int64_t yy = 0; yy < h; ++yy) {
        for (int64_t xx = 0; xx < w; ++xx) {
            T best(0); // zero padding participates in the max
            for (int64_t dy = -1; dy <= 1; ++dy) {
                const int64_t sy = yy + dy;
                if (sy < 0 || sy >= h) continue;
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    const int64_t sx = xx + dx;
                    if (sx < 0 || sx >= w) continue;
                    best = std::max(best, x.at(sy, sx));
                }
            }
            y.at(yy, xx) = best;
        }
    }
}

// ---------------------------------------------------------------------------
// Bilinear resampling (half-pixel centers, border clamped)
// ---------------------------------------------------------------------------

struct lerp_axis {
    std::vector<int64_t> i0, i1;
    std::vector<float> w1; // weight of i1; weight of i0 is 1-w1
    lerp_axis(int64_t in, int64_t out) : i0(out), i1(out), w1(out) {
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (int64_t o = 0; o < out; ++o) {
            double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
            if (src < 0) src = 0;
            if (src > static_cast<double>(in - 1)) src = static_cast<double>(in - 1);
            const int64_t lo = static_cast<int64_t>(src);
            i0[o] = lo;
            i1[o] = std::min(lo + 1, in - 1);
            w1[o] = static_cast<float>(src - static_cast<double>(lo));
        }
    }
};

template <class T>
void upsample_bilinear_fwd(const T* x, int64_t c, int64_t h, int64_t w,
                           int64_t ho, int64_t wo, T* y) {
    if (h == ho && w == wo) {
        std::copy(x, x + c * h * w, y);
        return;
    }
    const lerp_axis ay(h, ho), ax(w, wo);
    for (int64_t ci = 0; ci < c; ++ci) {
        const T* xc = x + ci * h * w;
        T* yc = y + ci * ho * wo;
        for (int64_t yo = 0; yo < ho; ++yo) {
            const T wy = static_cast<T>(ay.w1[yo]);
            const T* r0 = xc + ay.i0[yo] * w;
            const T* r1 = xc + ay.i1[yo] * w;
            for (int64_t xo = 0; xo < wo; ++xo) {
                const T wx = static_cast<T>(ax.w1[xo]);
                const T v0 = r0[ax.i0[xo]] * (T(1) - wx) + r0[ax.i1[xo]] * wx;
                const T v1 = r1[ax.i0[xo]] * (T(1) - wx) + r1[ax.i1[xo]] * wx;
                yc[yo * wo + xo] = v0 * (T(1) - wy) + v1 * wy;
            }
        }
    }
}

template <class T>
void upsample_bilinear_bwd(const T* gy, int64_t c, int64_t h, int64_t w,
                           int64_t ho, int64_t wo, T* gx) {
    if (h == ho && w == wo) {
        for (int64_t i = 0; i < c * h * w; ++i) gx[i] += gy[i];
        return;
    }
    const lerp_axis ay(h, ho), ax(w, wo);
    for (int64_t ci = 0; ci < c; ++ci) {
        const T* gyc = gy + ci * ho * wo;
        T* gxc = gx + ci * h * w;
        for (int64_t yo = 0; yo < ho; ++yo) {
            const T wy = static_cast<T>(ay.w1[yo]);
            T* r0 = gxc + ay.i0[yo] * w;
            T* r1 = gxc + ay.i1[yo] * w;
            for (int64_t xo = 0; xo < wo; ++xo) {
                const T wx = static_cast<T>(ax.w1[xo]);
                const T g = gyc[yo * wo + xo];
                r0[ax.i0[xo]] += g * (T(1) - wy) * (T(1) - wx);
                r0[ax.i1[xo]] += g * (T(1) - wy) * wx;
                r1[ax.i0[xo]] += g * wy * (T(1) - wx);
                r1[ax.i1[xo]] += g * wy * wx;
            }
        }
    }
}

// Exact box (area) resampling: output cell = overlap-weighted mean of input
// cells. Handles non-integer scale factors; conserves the mean.
template <class T>
void area_resample(const T* x, int64_t c, int64_t h, int64_t w,
                   int64_t ho, int64_t wo, T* y) {
    const double sy = static_cast<double>(h) / static_cast<double>(ho);
    const double sx = static_cast<double>(w) / static_cast<double>(wo);
    for (int64_t ci = 0; ci < c; ++ci) {
        const T* xc = x + ci * h * w;
        T* yc = y + ci * ho * wo;
        for (int64_t yo = 0; yo < ho; ++yo) {
            const double y0 = yo * sy, y1 = (yo + 1) * sy;
            const int64_t iy0 = static_cast<int64_t>(y0);
            const int64_t iy1 = std::min<int64_t>(h, static_cast<int64_t>(std::ceil(y1)));
            for (int64_t xo = 0; xo < wo; ++xo) {
                const double x0 = xo * sx, x1 = (xo + 1) * sx;
                const int64_t ix0 = static_cast<int64_t>(x0);
                const int64_t ix1 = std::min<int64_t>(w, static_cast<int64_t>(std::ceil(x1)));
                double acc = 0.0, wsum = 0.0;
                for (int64_t iy = iy0; iy < iy1; ++iy) {
                    const double oy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
                    for (int64_t ix = ix0; ix < ix1; ++ix) {
                        const double ox = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
                        acc += oy * ox * static_cast<double>(xc[iy * w + ix]);
                        wsum += oy * ox;
                    }
                }
                yc[yo * wo + xo] = static_cast<T>(acc / wsum);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Group normalization (per sample, no cross-sample statistics)
//
// Two statistic extents:
//  - spatial: classic GroupNorm, one mean/std per group over (C/g, H, W).
//    Scale-invariant but folds image-wide content into every activation.
//  - pixelwise: mean/std per group per pixel (over C/g channels only), which
//    preserves cross-channel amplitude ratios at each location.
// ---------------------------------------------------------------------------

template <class T>
void group_norm_pixelwise_fwd(const tensor<T>& x, const tensor<T>& gamma,
                              const tensor<T>& beta, int64_t groups, T eps, tensor<T>& y,
                              std::vector<T>& mean, std::vector<T>& rstd) {
    const int64_t c = x.dim(0), hw = x.numel() / c;
    const int64_t cg = c / groups;
    mean.resize(static_cast<size_t>(groups * hw));
    rstd.resize(static_cast<size_t>(groups * hw));
    for (int64_t g = 0; g < groups; ++g) {
        const T* xg = x.data() + g * cg * hw;
        T* mu_row = mean.data() + g * hw;
        T* rs_row = rstd.data() + g * hw;
        for (int64_t i = 0; i < hw; ++i) {
            double mu = 0;
            for (int64_t cc = 0; cc < cg; ++cc) mu += static_cast<double>(xg[cc * hw + i]);
            mu /= static_cast<double>(cg);
            double var = 0;
            for (int64_t cc = 0; cc < cg; ++cc) {
                const double d = static_cast<double>(xg[cc * hw + i]) - mu;
                var += d * d;
            }
            var /= static_cast<double>(cg);
            mu_row[i] = static_cast<T>(mu);
            rs_row[i] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        }
        for (int64_t cc = 0; cc < cg; ++cc) {
            const int64_t ch = g * cg + cc;
            const T ga = gamma[ch], be = beta[ch];
            const T* xr = x.data() + ch * hw;
            T* yr = y.data() + ch * hw;
            for (int64_t i = 0; i < hw; ++i)
                yr[i] = (xr[i] - mu_row[i]) * rs_row[i] * ga + be;
        }
    }
}

template <class T>
void group_norm_pixelwise_bwd(const tensor<T>& x, const tensor<T>& gamma,
                              const std::vector<T>& mean, const std::vector<T>& rstd,
                              int64_t groups, const tensor<T>& gy,
                              tensor<T>* gx, tensor<T>* ggamma, tensor<T>* gbeta) {
    const int64_t c = x.dim(0), hw = x.numel() / c;
    const int64_t cg = c / groups;
    const T inv_m = T(1) / static_cast<T>(cg);
    std::vector<T> s_dxhat(static_cast<size_t>(hw));
    std::vector<T> s_dxhat_xhat(static_cast<size_t>(hw));
    for (int64_t g = 0; g < groups; ++g) {
        const T* mu_row = mean.data() + g * hw;
        const T* rs_row = rstd.data() + g * hw;
        std::fill(s_dxhat.begin(), s_dxhat.end(), T(0));
        std::fill(s_dxhat_xhat.begin(), s_dxhat_xhat.end(), T(0));
        for (int64_t cc = 0; cc < cg; ++cc) {
            const int64_t ch = g * cg + cc;
            const T* xr = x.data() + ch * hw;
            const T* gyr = gy.data() + ch * hw;
            const T ga = gamma[ch];
            double dga = 0, dbe = 0;
            for (int64_t i = 0; i < hw; ++i) {
                const T xhat = (xr[i] - mu_row[i]) * rs_row[i];
                const T dxhat = gyr[i] * ga;
                s_dxhat[static_cast<size_t>(i)] += dxhat;
                s_dxhat_xhat[static_cast<size_t>(i)] += dxhat * xhat;
                dga += static_cast<double>(gyr[i]) * static_cast<double>(xhat);
                dbe += static_cast<double>(gyr[i]);
            }
            if (ggamma) (*ggamma)[ch] += static_cast<T>(dga);
            if (gbeta) (*gbeta)[ch] += static_cast<T>(dbe);
        }
        if (gx) {
            for (int64_t cc = 0; cc < cg; ++cc) {
                const int64_t ch = g * cg + cc;
                const T* xr = x.data() + ch * hw;
                const T* gyr = gy.data() + ch * hw;
                const T ga = gamma[ch];
                T* gxr = gx->data() + ch * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    const T xhat = (xr[i] - mu_row[i]) * rs_row[i];
                    const T dxhat = gyr[i] * ga;
                    gxr[i] += rs_row[i] * (dxhat - s_dxhat[static_cast<size_t>(i)] * inv_m -
                                           xhat * s_dxhat_xhat[static_cast<size_t>(i)] * inv_m);
                }
            }
        }
    }
}

template <class T>
void group_norm_fwd(const tensor<T>& x, const tensor<T>& gamma, const tensor<T>& beta,
                    int64_t groups, T eps, tensor<T>& y,
                    std::vector<T>& mean, std::vector<T>& rstd) {
    const int64_t c = x.dim(0), hw = x.numel() / c;
    const int64_t cg = c / groups;
    const int64_t m = cg * hw;
    mean.resize(groups);
    rstd.resize(groups);
    for (int64_t g = 0; g < groups; ++g) {
        const T* xg = x.data() + g * m;
        double mu = 0.0;
        for (int64_t i = 0; i < m; ++i) mu += static_cast<double>(xg[i]);
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            const double d = static_cast<double>(xg[i]) - mu;
            var += d * d;
        }
        var /= static_cast<double>(m);
        const T rs = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        mean[g] = static_cast<T>(mu);
        rstd[g] = rs;
        for (int64_t cc = 0; cc < cg; ++cc) {
            const int64_t ch = g * cg + cc;
            const T scale = rs * gamma[ch];
            const T shift = beta[ch] - mean[g] * scale;
            Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> xr(x.data() + ch * hw, hw);
            Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> yr(y.data() + ch * hw, hw);
            yr = xr * scale + shift;
        }
    }
}

template <class T>
void group_norm_bwd(const tensor<T>& x, const tensor<T>& gamma,
                    const std::vector<T>& mean, const std::vector<T>& rstd,
                    int64_t groups, const tensor<T>& gy,
                    tensor<T>* gx, tensor<T>* ggamma, tensor<T>* gbeta) {
    const int64_t c = x.dim(0), hw = x.numel() / c;
    const int64_t cg = c / groups;
    const int64_t m = cg * hw;
    for (int64_t g = 0; g < groups; ++g) {
        const T mu = mean[g], rs = rstd[g];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int64_t cc = 0; cc < cg; ++cc) {
            const int64_t ch = g * cg + cc;
            const T* xr = x.data() + ch * hw;
            const T* gyr = gy.data() + ch * hw;
            const T ga = gamma[ch];
            double dga = 0.0, dbe = 0.0;
            for (int64_t i = 0; i < hw; ++i) {
                const T xhat = (xr[i] - mu) * rs;
                const T dxhat = gyr[i] * ga;
                sum_dxhat += static_cast<double>(dxhat);
                sum_dxhat_xhat += static_cast<double>(dxhat) * static_cast<double>(xhat);
                dga += static_cast<double>(gyr[i]) * static_cast<double>(xhat);
                dbe += static_cast<double>(gyr[i]);
            }
            if (ggamma) (*ggamma)[ch] += static_cast<T>(dga);
            if (gbeta) (*gbeta)[ch] += static_cast<T>(dbe);
        }
        if (gx) {
            const T inv_m = T(1) / static_cast<T>(m);
            const T c1 = static_cast<T>(sum_dxhat) * inv_m;
            const T c2 = static_cast<T>(sum_dxhat_xhat) * inv_m;
            for (int64_t cc = 0; cc < cg; ++cc) {
                const int64_t ch = g * cg + cc;
                const T ga = gamma[ch];
                Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> xr(x.data() + ch * hw, hw);
                Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> gyr(gy.data() + ch * hw, hw);
                Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> gxr(gx->data() + ch * hw, hw);
                gxr += rs * (gyr * ga - c1 - ((xr - mu) * rs) * c2);
            }
        }
    }
}

} // namespace tsonet::kern
