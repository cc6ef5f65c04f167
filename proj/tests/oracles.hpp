#pragma once

// Independent brute-force oracles for supervision, losses, metrics, and the
// resampling chain. Deliberately written as plain per-pixel loops with no
// shared code paths with the library implementations they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "tsonet/core/tensor.hpp"

namespace oracle {

using tsonet::tensor;

// FP = 1(h > tau), checked pixel by pixel.
inline tensor<float> footprint(const tensor<float>& h, float tau) {
    tensor<float> out(h.shape());
    for (int64_t i = 0; i < h.numel(); ++i) out[i] = (h[i] > tau) ? 1.0f : 0.0f;
    return out;
}

// Classical binary erosion with a 3x3 structuring element where pixels
// outside the image count as foreground: I(p) = min over the neighborhood.
inline tensor<float> erode(const tensor<float>& fp) {
    const int64_t h = fp.dim(0), w = fp.dim(1);
    tensor<float> out(fp.shape());
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            float m = 1.0f;
            for (int64_t dy = -1; dy <= 1; ++dy) {
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    const int64_t sy = y + dy, sx = x + dx;
                    const float v = (sy < 0 || sy >= h || sx < 0 || sx >= w)
                                        ? 1.0f
                                        : fp.at(sy, sx);
                    m = std::min(m, v);
                }
            }
            out.at(y, x) = m;
        }
    }
    return out;
}

inline tensor<float> weight_map(const tensor<float>& interior, float alpha) {
    tensor<float> out(interior.shape());
    for (int64_t i = 0; i < interior.numel(); ++i)
        out[i] = interior[i] != 0.0f ? 1.0f : alpha;
    return out;
}

// ---------------------------------------------------------------------------
// Losses (double scalar loops)
// ---------------------------------------------------------------------------

template <class T>
double weighted_l1(const tensor<T>& hh, const tensor<T>& h, const tensor<T>& v,
                   const tensor<T>& w, double eps) {
    double num = 0.0, den = 0.0;
    for (int64_t i = 0; i < h.numel(); ++i) {
        num += double(v[i]) * double(w[i]) * std::abs(double(hh[i]) - double(h[i]));
        den += double(v[i]) * double(w[i]);
    }
    return num / (den + eps);
}

template <class T>
double tversky(const tensor<T>& p, const tensor<T>& f, const tensor<T>& v,
               double at, double bt, double eps) {
    double num = 0.0, den = 0.0;
    for (int64_t i = 0; i < f.numel(); ++i) {
        const double pv = double(p[i]), fv = double(f[i]), vv = double(v[i]);
        num += vv * pv * fv;
        den += vv * (pv * fv + at * fv * (1.0 - pv) + bt * (1.0 - fv) * pv);
    }
    return 1.0 - (num + eps) / (den + eps);
}

template <class T>
double bce(const tensor<T>& p, const tensor<T>& f, const tensor<T>& v, double eps) {
    double s = 0.0, vsum = 0.0;
    for (int64_t i = 0; i < f.numel(); ++i) {
        const double pv = double(p[i]), fv = double(f[i]), vv = double(v[i]);
        s += vv * (fv * std::log(pv + eps) + (1.0 - fv) * std::log(1.0 - pv + eps));
        vsum += vv;
    }
    return -s / (vsum + eps);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct height_stats {
    std::optional<double> mae, rmse, rel;
    int64_t n = 0;
};

inline height_stats height_metrics(const tensor<float>& hh, const tensor<float>& h,
                                   const tensor<float>& v, double tau, double eps) {
    double a = 0, q = 0, r = 0;
    int64_t n = 0;
    for (int64_t i = 0; i < h.numel(); ++i) {
        if (v[i] == 0.0f || !(double(h[i]) > tau)) continue;
        const double pred = std::max(0.0, double(hh[i]));
        const double e = std::abs(pred - double(h[i]));
        a += e;
        q += e * e;
        r += e / (double(h[i]) + eps);
        ++n;
    }
    height_stats out;
    out.n = n;
    if (n > 0) {
        out.mae = a / n;
        out.rmse = std::sqrt(q / n);
        out.rel = r / n;
    }
    return out;
}

struct confusion {
    int64_t tp = 0, fp = 0, fn = 0;
};

inline confusion footprint_counts(const tensor<float>& p, const tensor<float>& f,
                                  const tensor<float>& v, double thr) {
    confusion c;
    for (int64_t i = 0; i < f.numel(); ++i) {
        if (v[i] == 0.0f) continue;
        const bool pred = double(p[i]) > thr;
        const bool ref = f[i] != 0.0f;
        if (pred && ref) ++c.tp;
        if (pred && !ref) ++c.fp;
        if (!pred && ref) ++c.fn;
    }
    return c;
}

struct bin_stat {
    int64_t n = 0;
    std::optional<double> rmse;
};

inline std::vector<bin_stat> per_bin_rmse(const tensor<float>& hh, const tensor<float>& h,
                                          const tensor<float>& v,
                                          const std::vector<double>& edges, double tau) {
    std::vector<int64_t> cnt(edges.size(), 0);
    std::vector<double> qs(edges.size(), 0.0);
    for (int64_t i = 0; i < h.numel(); ++i) {
        if (v[i] == 0.0f || !(double(h[i]) > tau)) continue;
        size_t k = 0;
        while (k + 1 < edges.size() && double(h[i]) >= edges[k + 1]) ++k;
        const double e = std::max(0.0, double(hh[i])) - double(h[i]);
        qs[k] += e * e;
        ++cnt[k];
    }
    std::vector<bin_stat> out(edges.size());
    for (size_t k = 0; k < edges.size(); ++k) {
        out[k].n = cnt[k];
        if (cnt[k] > 0) out[k].rmse = std::sqrt(qs[k] / double(cnt[k]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Two-stage resampling oracle (independent area average + bilinear restore)
// ---------------------------------------------------------------------------

inline std::vector<double> area_down_1band(const std::vector<double>& x, int64_t h, int64_t w,
                                           int64_t ho, int64_t wo) {
    std::vector<double> y(static_cast<size_t>(ho * wo), 0.0);
    const double sy = double(h) / double(ho), sx = double(w) / double(wo);
    for (int64_t yo = 0; yo < ho; ++yo) {
        for (int64_t xo = 0; xo < wo; ++xo) {
            const double y0 = yo * sy, y1 = (yo + 1) * sy;
            const double x0 = xo * sx, x1 = (xo + 1) * sx;
            double acc = 0.0, ws = 0.0;
            for (int64_t iy = int64_t(std::floor(y0)); iy < int64_t(std::ceil(y1)); ++iy) {
                if (iy < 0 || iy >= h) continue;
                const double oy = std::min(double(iy + 1), y1) - std::max(double(iy), y0);
                for (int64_t ix = int64_t(std::floor(x0)); ix < int64_t(std::ceil(x1)); ++ix) {
                    if (ix < 0 || ix >= w) continue;
                    const double ox = std::min(double(ix + 1), x1) - std::max(double(ix), x0);
                    acc += oy * ox * x[size_t(iy * w + ix)];
                    ws += oy * ox;
                }
            }
            y[size_t(yo * wo + xo)] = acc / ws;
        }
    }
    return y;
}

inline std::vector<double> bilinear_up_1band(const std::vector<double>& x, int64_t h, int64_t w,
                                             int64_t ho, int64_t wo) {
    std::vector<double> y(static_cast<size_t>(ho * wo), 0.0);
    const double sy = double(h) / double(ho), sx = double(w) / double(wo);
    for (int64_t yo = 0; yo < ho; ++yo) {
        double fy = (yo + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, double(h - 1));
        const int64_t y0 = int64_t(fy);
        const int64_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - double(y0);
        for (int64_t xo = 0; xo < wo; ++xo) {
            double fx = (xo + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, double(w - 1));
            const int64_t x0 = int64_t(fx);
            const int64_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - double(x0);
            const double v0 = x[size_t(y0 * w + x0)] * (1 - wx) + x[size_t(y0 * w + x1)] * wx;
            const double v1 = x[size_t(y1 * w + x0)] * (1 - wx) + x[size_t(y1 * w + x1)] * wx;
            y[size_t(yo * wo + xo)] = v0 * (1 - wy) + v1 * wy;
        }
    }
    return y;
}

} // namespace oracle
