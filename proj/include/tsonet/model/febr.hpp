#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "tsonet/model/layers.hpp"

namespace tsonet {

// Channel-transposed multi-head attention plus a gated depth-wise
// feed-forward, each behind pre-normalization with a residual. Attention runs
// over the channel axis: queries/keys are L2-normalized along the spatial
// axis and a learnable per-head temperature scales the channel-by-channel
// affinities.
template <class T>
struct restormer_block {
    int64_t channels = 0;
    int64_t heads = 1;
    group_norm_layer<T> norm_attn, norm_ff;
    conv2d_layer<T> qkv_pw, qkv_dw, attn_out;
    std::vector<ag::var<T>> temperature;
    conv2d_layer<T> ff_in, ff_dw, ff_out;
    T l2_eps = static_cast<T>(1e-6);

    restormer_block() = default;
    restormer_block(module_builder<T> mb, int64_t c, int64_t heads_, int64_t expansion,
                    int64_t norm_groups, T l2_eps_)
        : channels(c), heads(heads_), l2_eps(l2_eps_) {
        norm_attn = group_norm_layer<T>(mb, "norm_attn", c, norm_groups);
        qkv_pw = conv2d_layer<T>(mb, "qkv_pw", c, 3 * c, 1);
        qkv_dw = conv2d_layer<T>(mb, "qkv_dw", 3 * c, 3 * c, 3, 3 * c);
        for (int64_t h = 0; h < heads; ++h)
            temperature.push_back(
                mb.param("temperature" + std::to_string(h), tensor<T>({1}, T(1))));
        attn_out = conv2d_layer<T>(mb, "attn_out", c, c, 1);
        norm_ff = group_norm_layer<T>(mb, "norm_ff", c, norm_groups);
        const int64_t hidden = expansion * c;
        ff_in = conv2d_layer<T>(mb, "ff_in", c, 2 * hidden, 1);
        ff_dw = conv2d_layer<T>(mb, "ff_dw", 2 * hidden, 2 * hidden, 3, 2 * hidden);
        ff_out = conv2d_layer<T>(mb, "ff_out", hidden, c, 1);
    }

    ag::var<T> operator()(const ag::var<T>& x) const {
        const int64_t c = channels, h = x->value.dim(1), w = x->value.dim(2);
        const int64_t ch = c / heads;

        auto qkv = qkv_dw(qkv_pw(norm_attn(x)));
        auto q = ag::slice0(qkv, 0, c);
        auto k = ag::slice0(qkv, c, 2 * c);
        auto v = ag::slice0(qkv, 2 * c, 3 * c);

        ag::var<T> merged;
        for (int64_t hd = 0; hd < heads; ++hd) {
            auto qh = ag::l2_normalize(ag::slice0(q, hd * ch, (hd + 1) * ch), 1, l2_eps);
            auto kh = ag::l2_normalize(ag::slice0(k, hd * ch, (hd + 1) * ch), 1, l2_eps);
            auto vh = ag::slice0(v, hd * ch, (hd + 1) * ch);
            auto scores = ag::mul_scalar_node(ag::matmul(qh, kh, false, true),
                                              temperature[static_cast<size_t>(hd)]);
            auto attn = ag::softmax(scores, 1);       // [ch, ch]
            auto out = ag::matmul(attn, vh);          // [ch, H*W]
            merged = merged ? ag::concat0(merged, out) : out;
        }
        auto y = ag::add(x, attn_out(ag::reshape(merged, {c, h, w})));

        auto f = ff_dw(ff_in(norm_ff(y)));
        const int64_t hidden = f->value.dim(0) / 2;
        auto a = ag::slice0(f, 0, hidden);
        auto g = ag::slice0(f, hidden, 2 * hidden);
        return ag::add(y, ff_out(ag::mul(ag::gelu(a), g)));
    }
};

// One Coarse-to-Fine Query Readout step: rows of the query matrix attend over
// the spatial tokens of a feature map.
//   A = softmax_rows(Norm(Q) Norm(Fbar)^T), R = A Fbar, Q' = Norm(Q + R)
// The attention Norm is always the eps-guarded per-row L2 normalization (with
// Q = 0 every attention row is exactly uniform). The post-residual Norm is
// selectable: the same row-L2 form, or row layer normalization. Row L2 caps
// query rows at unit length while readout rows scale with the token norms
// (~sqrt(C)), so under it the residual update erases most of the per-query
// identity each stage; layer normalization keeps the two on the same scale.
template <class T>
struct cfqr_result {
    ag::var<T> queries;   // [K, C]
    ag::var<T> attention; // [K, H*W], rows sum to 1
};

template <class T>
cfqr_result<T> cfqr_update(const ag::var<T>& q_prev, const ag::var<T>& feature, T eps,
                           bool layer_norm_queries = false) {
    check_contract(q_prev->value.rank() == 2, "cfqr: queries must be [K, C]");
    check_contract(q_prev->value.dim(1) == feature->value.dim(0),
                   "cfqr: query and feature widths differ");
    auto qn = ag::l2_normalize(q_prev, 1, eps);
    // Tokens are columns of the [C, H*W] view; normalizing down columns is
    // the row normalization of the flattened token matrix.
    auto fn = ag::l2_normalize(feature, 0, eps);
    auto attn = ag::softmax(ag::matmul(qn, fn), 1);          // [K, HW]
    auto readout = ag::matmul(attn, feature, false, true);   // A Fbar = A F^T
    cfqr_result<T> r;
    r.attention = attn;
    auto updated = ag::add(q_prev, readout);
    r.queries = layer_norm_queries ? ag::layer_norm_rows(updated, static_cast<T>(1e-5))
                                   : ag::l2_normalize(updated, 1, eps);
    return r;
}

inline double softplus_inverse(double y) { return std::log(std::expm1(y)); }

// Feature-Enhanced Bin Refinement: align + Restormer enhancement over the
// three coarsest height-pyramid levels with top-down additive fusion, three
// CFQR stages in coarsest-to-finest order, then two MLPs mapping the final
// queries to per-bin values (softplus, so b >= 0) and bin embeddings.
template <class T>
struct febr_module {
    int64_t channels = 0;
    int64_t num_bins = 0;
    T l2_eps = static_cast<T>(1e-6);
    bool cfqr_layer_norm = true;
    ag::var<T> query_embed; // [K, C] starting queries
    std::array<conv2d_layer<T>, 3> align;
    std::array<restormer_block<T>, 3> enhance_blocks;
    // Closing norm per enhancement level: keeps token magnitudes commensurate
    // with the unit-normalized queries, so Norm(Q + R) retains query identity
    // instead of collapsing onto the readout.
    std::array<group_norm_layer<T>, 3> enhance_norm;
    linear_layer<T> value_fc1, value_fc2;
    linear_layer<T> embed_fc1, embed_fc2;

    febr_module() = default;
    febr_module(module_builder<T> mb, int64_t c, int64_t k_bins, int64_t heads,
                int64_t expansion, int64_t norm_groups, double query_init_std,
                double bin_init_center, double bin_value_gain, T l2_eps_,
                bool cfqr_layer_norm_ = true)
        : channels(c), num_bins(k_bins), l2_eps(l2_eps_), cfqr_layer_norm(cfqr_layer_norm_) {
        tensor<T> q0 = (query_init_std > 0) ? mb.normal({k_bins, c}, query_init_std)
                                            : tensor<T>({k_bins, c});
        query_embed = mb.param("query_embed", std::move(q0));
        for (int i = 0; i < 3; ++i) {
            const std::string lv = "level" + std::to_string(i);
            align[static_cast<size_t>(i)] = conv2d_layer<T>(mb, lv + ".align", c, c, 1);
            enhance_blocks[static_cast<size_t>(i)] = restormer_block<T>(
                mb.scoped(lv + ".enhance"), c, heads, expansion, norm_groups, l2_eps_);
            enhance_norm[static_cast<size_t>(i)] =
                group_norm_layer<T>(mb, lv + ".out_norm", c, norm_groups);
        }
        value_fc1 = linear_layer<T>(mb, "value_mlp.fc1", c, c);
        // Spread the initial bin values over a plausible height range: the
        // boosted output std plus the softplus-inverse bias center the bins
        // where meters live instead of at softplus(0).
        value_fc2 = linear_layer<T>(mb, "value_mlp.fc2", c, 1,
                                    bin_value_gain / std::sqrt(double(c)),
                                    softplus_inverse(bin_init_center));
        embed_fc1 = linear_layer<T>(mb, "embed_mlp.fc1", c, c);
        embed_fc2 = linear_layer<T>(mb, "embed_mlp.fc2", c, c);
    }

    // feature: current level map [C,H,W]; prev: one-coarser enhanced map or null.
    ag::var<T> enhance_level(int level, const ag::var<T>& feature,
                             const ag::var<T>& prev) const {
        auto x = align[static_cast<size_t>(level)](feature);
        if (prev) {
            check_contract(prev->value.dim(1) * 2 == feature->value.dim(1) &&
                               prev->value.dim(2) * 2 == feature->value.dim(2),
                           "febr: enhanced feature does not upsample onto the next level");
            x = ag::add(x, ag::upsample_bilinear(prev, feature->value.dim(1),
                                                 feature->value.dim(2)));
        }
        auto y = enhance_blocks[static_cast<size_t>(level)](x);
        return enhance_norm[static_cast<size_t>(level)](y);
    }

    struct outputs {
        ag::var<T> bin_values;                 // [K, 1], softplus-activated
        ag::var<T> bin_embeddings;             // [K, C]
        ag::var<T> queries;                    // final refined queries
        std::array<ag::var<T>, 3> attention;   // per-stage CFQR attention
        std::array<ag::var<T>, 3> enhanced;    // per-level enhanced features
    };

    // levels: coarsest -> finest (H/16, H/8, H/4 of the input image).
    outputs operator()(const std::array<ag::var<T>, 3>& levels) const {
        outputs o;
        ag::var<T> prev;
        ag::var<T> q = query_embed;
        for (int i = 0; i < 3; ++i) {
            prev = enhance_level(i, levels[static_cast<size_t>(i)], prev);
            o.enhanced[static_cast<size_t>(i)] = prev;
            auto r = cfqr_update(q, prev, l2_eps, cfqr_layer_norm);
            q = r.queries;
            o.attention[static_cast<size_t>(i)] = r.attention;
        }
        o.queries = q;
        o.bin_values = ag::softplus(value_fc2(ag::gelu(value_fc1(q))));
        o.bin_embeddings = embed_fc2(ag::gelu(embed_fc1(q)));
        return o;
    }
};

// logits[k, x] = E_k . F[:, x]; logits are upsampled to the output grid first
// and only then normalized, so the per-pixel distribution is exact at full
// resolution.
template <class T>
ag::var<T> bin_logits_probs(const ag::var<T>& embeddings, const ag::var<T>& refined_h,
                            int64_t out_h, int64_t out_w) {
    check_contract(embeddings->value.dim(1) == refined_h->value.dim(0),
                   "bin_logits: embedding width must match feature channels");
    const int64_t k = embeddings->value.dim(0);
    auto logits = ag::matmul(embeddings, refined_h); // [K, Hs*Ws]
    auto logits3 = ag::reshape(logits, {k, refined_h->value.dim(1), refined_h->value.dim(2)});
    auto up = ag::upsample_bilinear(logits3, out_h, out_w);
    return ag::softmax(up, 0); // normalize over bins at every pixel
}

// h_hat(x) = sum_k p_k(x) b_k, a convex combination of the bin values.
template <class T>
ag::var<T> height_expectation(const ag::var<T>& probs, const ag::var<T>& bin_values) {
    return ag::matmul(probs, bin_values, true, false); // [HW, 1]
}

} // namespace tsonet
