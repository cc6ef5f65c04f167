#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tsonet/core/error.hpp"

namespace tsonet {

struct model_config {
    int64_t in_bands = 7;       // 7 / 4 / 3 under band ablation
    int64_t encoder_base = 32;  // encoder channels = base * (1,2,4,8,16)
    int64_t stream_channels = 128;
    int64_t num_bins = 64;
    int64_t attn_heads = 4;
    int64_t norm_groups = 4;
    // true: classic whole-image group statistics; false: per-pixel group
    // statistics (channel-only extent)
    bool norm_spatial_stats = true;
    int64_t lrgt_reduction = 4; // M
    int64_t lrgt_blocks = 2;    // N
    int64_t gdfn_expansion = 2;
    double query_init_std = 1.0; // 0 restores all-zero initial queries
    bool cfqr_layer_norm = true; // false: eps-guarded row-L2 after the residual
    double bin_init_center_m = 10.0;
    double bin_value_gain = 6.0;
    bool csem_residual = true;
    bool use_csem = true;
    bool use_febr = true;
    bool use_footprint_stream = true;
    double l2_eps = 1e-6;

    void validate() const {
        if (in_bands != 7 && in_bands != 4 && in_bands != 3)
            throw config_error("model: in_bands must be 7, 4, or 3");
        if (encoder_base < 4 || encoder_base % 4 != 0)
            throw config_error("model: encoder_base must be a positive multiple of 4");
        if (stream_channels < 8 || stream_channels % 4 != 0)
            throw config_error("model: stream_channels must be a multiple of 4 and >= 8");
        if (stream_channels % attn_heads != 0)
            throw config_error("model: stream_channels must divide into attn_heads");
        if (num_bins < 2) throw config_error("model: num_bins must be >= 2");
        if (lrgt_reduction < 1 || stream_channels % lrgt_reduction != 0)
            throw config_error("model: stream_channels must divide by lrgt_reduction");
        if (query_init_std < 0) throw config_error("model: query_init_std must be >= 0");
        if (bin_init_center_m <= 0 || bin_value_gain <= 0)
            throw config_error("model: bin init parameters must be positive");
        if (use_csem && !use_footprint_stream)
            throw config_error("model: CSEM requires the footprint stream");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["in_bands"] = in_bands;
        j["encoder_base"] = encoder_base;
        j["stream_channels"] = stream_channels;
        j["num_bins"] = num_bins;
        j["attn_heads"] = attn_heads;
        j["norm_groups"] = norm_groups;
        j["norm_spatial_stats"] = norm_spatial_stats;
        j["lrgt_reduction"] = lrgt_reduction;
        j["lrgt_blocks"] = lrgt_blocks;
        j["gdfn_expansion"] = gdfn_expansion;
        j["query_init_std"] = query_init_std;
        j["cfqr_layer_norm"] = cfqr_layer_norm;
        j["bin_init_center_m"] = bin_init_center_m;
        j["bin_value_gain"] = bin_value_gain;
        j["csem_residual"] = csem_residual;
        j["use_csem"] = use_csem;
        j["use_febr"] = use_febr;
        j["use_footprint_stream"] = use_footprint_stream;
        j["l2_eps"] = l2_eps;
        return j;
    }

    static model_config from_json(const nlohmann::json& j) {
        model_config c;
        c.in_bands = j.value("in_bands", c.in_bands);
        c.encoder_base = j.value("encoder_base", c.encoder_base);
        c.stream_channels = j.value("stream_channels", c.stream_channels);
        c.num_bins = j.value("num_bins", c.num_bins);
        c.attn_heads = j.value("attn_heads", c.attn_heads);
        c.norm_groups = j.value("norm_groups", c.norm_groups);
        c.norm_spatial_stats = j.value("norm_spatial_stats", c.norm_spatial_stats);
        c.lrgt_reduction = j.value("lrgt_reduction", c.lrgt_reduction);
        c.lrgt_blocks = j.value("lrgt_blocks", c.lrgt_blocks);
        c.gdfn_expansion = j.value("gdfn_expansion", c.gdfn_expansion);
        c.query_init_std = j.value("query_init_std", c.query_init_std);
        c.cfqr_layer_norm = j.value("cfqr_layer_norm", c.cfqr_layer_norm);
        c.bin_init_center_m = j.value("bin_init_center_m", c.bin_init_center_m);
        c.bin_value_gain = j.value("bin_value_gain", c.bin_value_gain);
        c.csem_residual = j.value("csem_residual", c.csem_residual);
        c.use_csem = j.value("use_csem", c.use_csem);
        c.use_febr = j.value("use_febr", c.use_febr);
        c.use_footprint_stream = j.value("use_footprint_stream", c.use_footprint_stream);
        c.l2_eps = j.value("l2_eps", c.l2_eps);
        c.validate();
        return c;
    }
};

} // namespace tsonet
