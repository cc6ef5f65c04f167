#pragma once

#include <array>
#include <string>

#include "tsonet/model/layers.hpp"

namespace tsonet {

// Per-task FPN-style top-down decoder over encoder levels 2..5 (spatial H/2
// down to H/16). Lateral 1x1 projections to the stream width, top-down
// upsample-and-add, then a residual 3x3 smoothing unit per merged level.
// maps[0] is the stream-resolution output (H/2); maps[1..3] get coarser by
// factor 2.
template <class T>
struct fpn_decoder {
    std::array<conv2d_layer<T>, 4> lateral;
    std::array<residual_conv_unit<T>, 4> smooth;

    fpn_decoder() = default;
    fpn_decoder(module_builder<T> mb, const std::array<int64_t, 5>& enc_channels,
                int64_t stream_c, int64_t norm_groups) {
        for (int j = 0; j < 4; ++j) {
            const std::string lv = "level" + std::to_string(j + 1);
            lateral[static_cast<size_t>(j)] = conv2d_layer<T>(
                mb, lv + ".lateral", enc_channels[static_cast<size_t>(j + 1)], stream_c, 1);
            smooth[static_cast<size_t>(j)] =
                residual_conv_unit<T>(mb, lv + ".smooth", stream_c, norm_groups);
        }
    }

    std::array<ag::var<T>, 4> operator()(const std::array<ag::var<T>, 5>& pyramid) const {
        std::array<ag::var<T>, 4> merged;
        for (int j = 3; j >= 0; --j) {
            auto lat = lateral[static_cast<size_t>(j)](pyramid[static_cast<size_t>(j + 1)]);
            if (j == 3) {
                merged[3] = lat;
            } else {
                auto up = ag::upsample_bilinear(merged[static_cast<size_t>(j + 1)],
                                                lat->value.dim(1), lat->value.dim(2));
                merged[static_cast<size_t>(j)] = ag::add(lat, up);
            }
        }
        std::array<ag::var<T>, 4> maps;
        for (size_t j = 0; j < 4; ++j) maps[j] = smooth[j](merged[j]);
        return maps;
    }
};

} // namespace tsonet
