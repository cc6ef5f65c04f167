#pragma once

#include <array>
#include <cstdint>

#include "tsonet/model/config.hpp"
#include "tsonet/model/csem.hpp"
#include "tsonet/model/decoder.hpp"
#include "tsonet/model/encoder.hpp"
#include "tsonet/model/febr.hpp"

namespace tsonet {

// The two-stream ordinal network: shared encoder, per-task FPN decoders,
// cross-stream exchange at stream resolution, and either the bin head
// (expectation over refined ordinal queries) or a plain 1x1 regression head.
template <class T>
struct tsonet_model {
    model_config cfg;
    ag::param_store<T> params;
    rng init_rng;

    encoder_net<T> encoder;
    fpn_decoder<T> decoder_h;
    fpn_decoder<T> decoder_fp;
    csem_module<T> csem;
    febr_module<T> febr;
    conv2d_layer<T> footprint_head;  // 3x3, C -> 1
    conv2d_layer<T> regression_head; // 1x1, C -> 1 (no-bins variant)

    explicit tsonet_model(const model_config& cfg_, uint64_t seed = 0)
        : cfg(cfg_), init_rng(seed ^ 0x7350ULL) {
        cfg.validate();
        module_builder<T> mb{params, init_rng, "", cfg.norm_spatial_stats};
        encoder = encoder_net<T>(mb.scoped("encoder"), cfg.in_bands, cfg.encoder_base,
                                 cfg.norm_groups);
        decoder_h = fpn_decoder<T>(mb.scoped("decoder_h"), encoder.channels,
                                   cfg.stream_channels, cfg.norm_groups);
        if (cfg.use_footprint_stream) {
            decoder_fp = fpn_decoder<T>(mb.scoped("decoder_fp"), encoder.channels,
                                        cfg.stream_channels, cfg.norm_groups);
            if (cfg.use_csem)
                csem = csem_module<T>(mb.scoped("csem"), cfg.stream_channels,
                                      cfg.lrgt_reduction, cfg.lrgt_blocks, cfg.norm_groups,
                                      cfg.csem_residual);
            auto hb = mb.scoped("head_fp");
            footprint_head = conv2d_layer<T>(hb, "conv", cfg.stream_channels, 1, 3);
        }
        if (cfg.use_febr) {
            febr = febr_module<T>(mb.scoped("febr"), cfg.stream_channels, cfg.num_bins,
                                  cfg.attn_heads, cfg.gdfn_expansion, cfg.norm_groups,
                                  cfg.query_init_std, cfg.bin_init_center_m,
                                  cfg.bin_value_gain, static_cast<T>(cfg.l2_eps),
                                  cfg.cfqr_layer_norm);
        } else {
            auto hb = mb.scoped("head_h");
            regression_head = conv2d_layer<T>(hb, "conv", cfg.stream_channels, 1, 1);
        }
    }

    struct forward_out {
        ag::var<T> height;    // numel = H*W
        ag::var<T> fp_logits; // [1,H,W]; null without the footprint stream
        ag::var<T> bin_values;
        ag::var<T> bin_probs; // [K,H,W]; per-pixel distribution over bins
        ag::var<T> queries;
        std::array<ag::var<T>, 3> cfqr_attention{};
        // pre/post exchange taps
        ag::var<T> f_h_pre, f_h_post, f_fp_pre, f_fp_post;
        ag::var<T> csem_confidence, csem_gate;
    };

    forward_out forward(const ag::var<T>& image) const {
        const int64_t h = image->value.dim(1), w = image->value.dim(2);
        forward_out out;

        auto pyramid = encoder(image);
        auto maps_h = decoder_h(pyramid);
        out.f_h_pre = maps_h[0];
        out.f_h_post = maps_h[0];

        if (cfg.use_footprint_stream) {
            auto maps_fp = decoder_fp(pyramid);
            out.f_fp_pre = maps_fp[0];
            out.f_fp_post = maps_fp[0];
            if (cfg.use_csem) {
                auto ex = csem(out.f_fp_pre, out.f_h_pre);
                out.f_fp_post = ex.refined_fp;
                out.f_h_post = ex.refined_h;
                out.csem_confidence = ex.confidence;
                out.csem_gate = ex.gate_mask;
            }
            out.fp_logits = ag::upsample_bilinear(footprint_head(out.f_fp_post), h, w);
        }

        if (cfg.use_febr) {
            auto fo = febr({maps_h[3], maps_h[2], maps_h[1]});
            out.bin_values = fo.bin_values;
            out.queries = fo.queries;
            out.cfqr_attention = fo.attention;
            out.bin_probs = bin_logits_probs(fo.bin_embeddings, out.f_h_post, h, w);
            out.height = height_expectation(out.bin_probs, out.bin_values);
        } else {
            out.height = ag::upsample_bilinear(regression_head(out.f_h_post), h, w);
        }
        return out;
    }

    forward_out forward(const tensor<T>& image) const {
        return forward(ag::constant(image));
    }

    // Height map as a plain [H,W] float tensor (for metrics and prediction).
    static tensor<float> height_map(const forward_out& o, int64_t h, int64_t w) {
        tensor<float> m({h, w});
        const auto& v = o.height->value;
        check_contract(v.numel() == h * w, "height_map: size mismatch");
        for (int64_t i = 0; i < h * w; ++i) m[i] = static_cast<float>(v[i]);
        return m;
    }

    static tensor<float> footprint_prob_map(const forward_out& o, int64_t h, int64_t w) {
        tensor<float> m({h, w});
        if (!o.fp_logits) return tensor<float>();
        for (int64_t i = 0; i < h * w; ++i)
            m[i] = static_cast<float>(ag::sigmoid_scalar(o.fp_logits->value[i]));
        return m;
    }
};

} // namespace tsonet
