#pragma once

#include <array>
#include <string>

#include "tsonet/model/layers.hpp"

namespace tsonet {

// Five-level hierarchical encoder shared by both streams. Each level widens
// with a plain 3x3 conv and refines with a pre-norm residual unit; levels
// after the first are entered through a 2x2 max pool, so spatial sizes run
// H, H/2, H/4, H/8, H/16. Normalization lives only inside the residual
// branches, leaving an identity path that preserves radiometric scale.
template <class T>
struct encoder_net {
    std::array<int64_t, 5> channels{};
    std::array<conv2d_layer<T>, 5> widen;
    std::array<residual_conv_unit<T>, 5> refine;

    encoder_net() = default;
    encoder_net(module_builder<T> mb, int64_t in_bands, int64_t base, int64_t norm_groups) {
        for (int i = 0; i < 5; ++i) channels[static_cast<size_t>(i)] = base << i;
        int64_t in_c = in_bands;
        for (int i = 0; i < 5; ++i) {
            const std::string lv = "level" + std::to_string(i + 1);
            widen[static_cast<size_t>(i)] =
                conv2d_layer<T>(mb, lv + ".widen", in_c, channels[static_cast<size_t>(i)], 3);
            refine[static_cast<size_t>(i)] = residual_conv_unit<T>(
                mb, lv + ".refine", channels[static_cast<size_t>(i)], norm_groups);
            in_c = channels[static_cast<size_t>(i)];
        }
    }

    std::array<ag::var<T>, 5> operator()(const ag::var<T>& image) const {
        check_contract(image->value.rank() == 3, "encode: image must be [C,H,W]");
        check_contract(image->value.dim(1) % 16 == 0 && image->value.dim(2) % 16 == 0,
                       "encode: spatial size must be divisible by 16");
        std::array<ag::var<T>, 5> pyramid;
        ag::var<T> x = image;
        for (size_t i = 0; i < 5; ++i) {
            if (i > 0) x = ag::maxpool2(x);
            x = refine[i](widen[i](x));
            pyramid[i] = x;
        }
        return pyramid;
    }
};

} // namespace tsonet
