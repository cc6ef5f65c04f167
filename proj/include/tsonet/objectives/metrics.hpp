#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsonet/core/error.hpp"
#include "tsonet/core/tensor.hpp"

namespace tsonet {

inline std::vector<double> default_height_bin_edges() {
    // 10 m steps up to 100 m; the last bin is open-ended.
    std::vector<double> e;
    for (int i = 0; i <= 100; i += 10) e.push_back(static_cast<double>(i));
    return e;
}

struct bin_row {
    double lo = 0.0;
    double hi = 0.0; // +inf for the open-ended tail
    int64_t count = 0;
    std::optional<double> rmse;
};

// Regression metrics are over building pixels (v=1 and h > tau_fp);
// segmentation metrics over valid pixels. Empty sets report null, never 0.
struct metrics_report {
    std::optional<double> mae, rmse, rel;
    std::optional<double> iou, recall, precision, f1;
    int64_t height_pixels = 0;
    int64_t valid_pixels = 0;
    int64_t tp = 0, fp = 0, fn = 0;
    std::vector<bin_row> bins;

    nlohmann::json to_json() const {
        auto opt = [](const std::optional<double>& v) {
            return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
        };
        nlohmann::json j;
        j["mae"] = opt(mae);
        j["rmse"] = opt(rmse);
        j["rel"] = opt(rel);
        j["iou"] = opt(iou);
        j["recall"] = opt(recall);
        j["precision"] = opt(precision);
        j["f1"] = opt(f1);
        j["height_pixels"] = height_pixels;
        j["valid_pixels"] = valid_pixels;
        j["tp"] = tp;
        j["fp"] = fp;
        j["fn"] = fn;
        j["bins"] = nlohmann::json::array();
        for (const auto& b : bins) {
            nlohmann::json bj;
            bj["lo"] = b.lo;
            bj["hi"] = std::isinf(b.hi) ? nlohmann::json(nullptr) : nlohmann::json(b.hi);
            bj["count"] = b.count;
            bj["rmse"] = opt(b.rmse);
            j["bins"].push_back(bj);
        }
        return j;
    }

    std::string to_csv() const {
        auto cell = [](const std::optional<double>& v) {
            return v ? std::to_string(*v) : std::string();
        };
        std::ostringstream os;
        os << "mae,rmse,rel,iou,recall,precision,f1\n";
        os << cell(mae) << ',' << cell(rmse) << ',' << cell(rel) << ',' << cell(iou) << ','
           << cell(recall) << ',' << cell(precision) << ',' << cell(f1) << "\n";
        os << "bin_lo,bin_hi,count,rmse\n";
        for (const auto& b : bins) {
            os << b.lo << ',';
            if (std::isinf(b.hi)) os << "inf"; else os << b.hi;
            os << ',' << b.count << ',' << cell(b.rmse) << "\n";
        }
        return os.str();
    }
};

// Streaming accumulator: global sums over the whole split, ratios once at the
// end (matches the pixel-set form of the metric definitions; not per-patch
// averaging).
struct metrics_accumulator {
    double tau_fp = 2.0;
    double eps = 1e-3;
    double prob_threshold = 0.5;
    std::vector<double> bin_edges = default_height_bin_edges();

    double abs_sum = 0.0, sq_sum = 0.0, rel_sum = 0.0;
    int64_t n_height = 0;
    int64_t valid = 0;
    int64_t tp = 0, fp = 0, fn = 0;
    std::vector<int64_t> bin_count;
    std::vector<double> bin_sq;

    metrics_accumulator() { reset_bins(); }

    void reset_bins() {
        bin_count.assign(bin_edges.size(), 0);
        bin_sq.assign(bin_edges.size(), 0.0);
    }

    size_t bin_index(double h) const {
        // bin_edges are lower edges; the last bin is open-ended.
        size_t k = 0;
        while (k + 1 < bin_edges.size() && h >= bin_edges[k + 1]) ++k;
        return k;
    }

    // h_hat_prob may be empty when the model has no footprint stream.
    void add(const tensor<float>& h_hat, const tensor<float>& h, const tensor<float>& v,
             const tensor<float>& fp_prob, const tensor<float>& fp_ref) {
        check_contract(h_hat.numel() == h.numel() && h.numel() == v.numel(),
                       "metrics: size mismatch");
        const int64_t n = h.numel();
        for (int64_t i = 0; i < n; ++i) {
            if (v[i] == 0.0f) continue;
            ++valid;
            const double hv = static_cast<double>(h[i]);
            // Negative predictions are clipped to zero first.
            const double pv = std::max(0.0, static_cast<double>(h_hat[i]));
            if (hv > tau_fp) {
                const double e = std::abs(pv - hv);
                abs_sum += e;
                sq_sum += e * e;
                rel_sum += e / (hv + eps);
                ++n_height;
                const size_t k = bin_index(hv);
                ++bin_count[k];
                bin_sq[k] += e * e;
            }
            if (fp_prob.numel() == n && fp_ref.numel() == n) {
                const bool pred = static_cast<double>(fp_prob[i]) > prob_threshold;
                const bool ref = fp_ref[i] != 0.0f;
                if (pred && ref) ++tp;
                else if (pred && !ref) ++fp;
                else if (!pred && ref) ++fn;
            }
        }
    }

    metrics_report finalize() const {
        metrics_report r;
        r.height_pixels = n_height;
        r.valid_pixels = valid;
        r.tp = tp;
        r.fp = fp;
        r.fn = fn;
        if (n_height > 0) {
            const double inv = 1.0 / static_cast<double>(n_height);
            r.mae = abs_sum * inv;
            r.rmse = std::sqrt(sq_sum * inv);
            r.rel = rel_sum * inv;
        }
        const double dtp = static_cast<double>(tp), dfp = static_cast<double>(fp),
                     dfn = static_cast<double>(fn);
        r.iou = (dtp + eps) / (dtp + dfp + dfn + eps);
        r.recall = (dtp + eps) / (dtp + dfn + eps);
        r.precision = (dtp + eps) / (dtp + dfp + eps);
        r.f1 = 2.0 * (*r.precision) * (*r.recall) / (*r.precision + *r.recall + eps);
        for (size_t k = 0; k < bin_edges.size(); ++k) {
            bin_row b;
            b.lo = bin_edges[k];
            b.hi = (k + 1 < bin_edges.size()) ? bin_edges[k + 1]
                                              : std::numeric_limits<double>::infinity();
            b.count = bin_count[k];
            if (bin_count[k] > 0)
                b.rmse = std::sqrt(bin_sq[k] / static_cast<double>(bin_count[k]));
            r.bins.push_back(b);
        }
        return r;
    }
};

// ---------------------------------------------------------------------------
// Single-map convenience forms
// ---------------------------------------------------------------------------

struct height_metric_values {
    std::optional<double> mae, rmse, rel;
    int64_t count = 0;
};

inline height_metric_values height_metrics(const tensor<float>& h_hat, const tensor<float>& h,
                                           const tensor<float>& v, double tau_fp,
                                           double eps = 1e-3) {
    metrics_accumulator acc;
    acc.tau_fp = tau_fp;
    acc.eps = eps;
    acc.add(h_hat, h, v, tensor<float>(), tensor<float>());
    auto r = acc.finalize();
    return {r.mae, r.rmse, r.rel, r.height_pixels};
}

struct footprint_metric_values {
    double iou = 0.0, recall = 0.0, precision = 0.0, f1 = 0.0;
    int64_t tp = 0, fp = 0, fn = 0;
};

inline footprint_metric_values footprint_metrics(const tensor<float>& p_hat,
                                                 const tensor<float>& f,
                                                 const tensor<float>& v,
                                                 double threshold = 0.5, double eps = 1e-3) {
    metrics_accumulator acc;
    acc.eps = eps;
    acc.prob_threshold = threshold;
    tensor<float> dummy_h(f.shape(), 0.0f);
    acc.add(dummy_h, dummy_h, v, p_hat, f);
    auto r = acc.finalize();
    return {*r.iou, *r.recall, *r.precision, *r.f1, r.tp, r.fp, r.fn};
}

inline std::vector<bin_row> rmse_by_height_bin(const tensor<float>& h_hat,
                                               const tensor<float>& h, const tensor<float>& v,
                                               std::vector<double> bin_edges,
                                               double tau_fp = 2.0) {
    metrics_accumulator acc;
    acc.tau_fp = tau_fp;
    acc.bin_edges = std::move(bin_edges);
    acc.reset_bins();
    acc.add(h_hat, h, v, tensor<float>(), tensor<float>());
    return acc.finalize().bins;
}

} // namespace tsonet
