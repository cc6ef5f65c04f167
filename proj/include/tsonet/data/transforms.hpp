#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tsonet/core/error.hpp"
#include "tsonet/core/kernels.hpp"
#include "tsonet/data/patch.hpp"

namespace tsonet::data {

enum class band_set { all7, rgb_nir, rgb };

inline band_set parse_band_set(const std::string& s) {
    if (s == "ALL7" || s == "all7") return band_set::all7;
    if (s == "RGB_NIR" || s == "rgb_nir") return band_set::rgb_nir;
    if (s == "RGB" || s == "rgb") return band_set::rgb;
    throw config_error("unknown band set: " + s);
}

inline const char* band_set_name(band_set b) {
    switch (b) {
        case band_set::all7: return "ALL7";
        case band_set::rgb_nir: return "RGB_NIR";
        case band_set::rgb: return "RGB";
    }
    return "?";
}

inline int band_set_count(band_set b) {
    switch (b) {
        case band_set::all7: return 7;
        case band_set::rgb_nir: return 4;
        case band_set::rgb: return 3;
    }
    return 0;
}

// RGB = (MS3, MS2, MS1) at 665/560/490 nm; NIR = MS7 at 842 nm. Spatial axes
// are untouched: each output band is a verbatim copy of one input band.
inline patch select_bands(const patch& p, band_set bs) {
    check_contract(p.bands() == kBands, "select_bands: patch must carry 7 bands");
    std::vector<int64_t> pick;
    switch (bs) {
        case band_set::all7: pick = {0, 1, 2, 3, 4, 5, 6}; break;
        case band_set::rgb_nir: pick = {2, 1, 0, 6}; break;
        case band_set::rgb: pick = {2, 1, 0}; break;
    }
    patch out;
    out.heights = p.heights;
    out.valid_mask = p.valid_mask;
    out.meta = p.meta;
    out.meta.band_order.clear();
    const int64_t hw = p.height() * p.width();
    out.image = tensor<float>({static_cast<int64_t>(pick.size()), p.height(), p.width()});
    for (size_t i = 0; i < pick.size(); ++i) {
        std::copy(p.image.data() + pick[i] * hw, p.image.data() + (pick[i] + 1) * hw,
                  out.image.data() + static_cast<int64_t>(i) * hw);
        out.meta.band_order.push_back(p.meta.band_order[static_cast<size_t>(pick[i])]);
    }
    return out;
}

// Simulates a coarser sensor: area-average down to the target ground sampling
// distance, then bilinearly resample back to the native grid. Heights and the
// valid mask are reference data and stay untouched; meta records the
// simulated gsd.
inline patch degrade_resolution(const patch& p, float target_gsd_m) {
    if (target_gsd_m < p.meta.gsd_m)
        throw config_error("degrade_resolution: target gsd " + std::to_string(target_gsd_m) +
                           " is finer than native " + std::to_string(p.meta.gsd_m));
    patch out = p;
    out.meta.gsd_m = target_gsd_m;
    if (target_gsd_m == p.meta.gsd_m) return out;

    const int64_t b = p.bands(), h = p.height(), w = p.width();
    const double factor = static_cast<double>(target_gsd_m) / static_cast<double>(p.meta.gsd_m);
    const int64_t hs = std::max<int64_t>(1, std::llround(static_cast<double>(h) / factor));
    const int64_t ws = std::max<int64_t>(1, std::llround(static_cast<double>(w) / factor));

    tensor<float> small({b, hs, ws});
    kern::area_resample(p.image.data(), b, h, w, hs, ws, small.data());
    kern::upsample_bilinear_fwd(small.data(), b, hs, ws, h, w, out.image.data());
    return out;
}

} // namespace tsonet::data
