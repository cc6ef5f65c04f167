#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsonet/core/error.hpp"
#include "tsonet/core/tensor.hpp"

namespace tsonet::data {

inline constexpr int64_t kPatchSize = 256;
inline constexpr int64_t kBands = 7;
inline constexpr float kNativeGsdM = 4.75f;

struct band_info {
    const char* name;
    double center_nm;
    double bandwidth_nm;
};

// PhiSat-2 MultiScape100 VNIR multispectral bands.
inline const std::array<band_info, 7>& phisat2_bands() {
    static const std::array<band_info, 7> table = {{
        {"MS1", 490.0, 65.0},
        {"MS2", 560.0, 35.0},
        {"MS3", 665.0, 30.0},
        {"MS4", 705.0, 15.0},
        {"MS5", 740.0, 15.0},
        {"MS6", 783.0, 20.0},
        {"MS7", 842.0, 115.0},
    }};
    return table;
}

inline std::vector<std::string> default_band_order() {
    std::vector<std::string> names;
    for (const auto& b : phisat2_bands()) names.emplace_back(b.name);
    return names;
}

struct patch_meta {
    std::string scene_id;
    float gsd_m = kNativeGsdM;
    std::vector<std::string> band_order = default_band_order();
};

// One co-registered sample: multispectral reflectances, reference building
// heights in meters, and the per-pixel valid-data indicator.
struct patch {
    tensor<float> image;      // [bands, H, W]
    tensor<float> heights;    // [H, W], meters, 0 on background and NoData
    tensor<float> valid_mask; // [H, W], {0, 1}
    patch_meta meta;

    int64_t bands() const { return image.dim(0); }
    int64_t height() const { return image.dim(1); }
    int64_t width() const { return image.dim(2); }
};

// Pixels where every band is exactly the 0.0 sentinel carry no data.
inline tensor<float> derive_valid_mask(const tensor<float>& image) {
    const int64_t b = image.dim(0), h = image.dim(1), w = image.dim(2);
    tensor<float> mask({h, w}, 0.0f);
    const int64_t hw = h * w;
    for (int64_t i = 0; i < hw; ++i) {
        bool all_zero = true;
        for (int64_t c = 0; c < b; ++c) {
            if (image[c * hw + i] != 0.0f) { all_zero = false; break; }
        }
        mask[i] = all_zero ? 0.0f : 1.0f;
    }
    return mask;
}

namespace detail {

inline std::filesystem::path sample_stem(const std::filesystem::path& path) {
    std::string s = path.string();
    for (const char* suffix : {".img.f32", ".hgt.f32", ".json"}) {
        const std::string suf(suffix);
        if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0)
            return std::filesystem::path(s.substr(0, s.size() - suf.size()));
    }
    return path;
}

inline void write_f32(const std::filesystem::path& p, const float* data, int64_t n) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("cannot open for writing: " + p.string());
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
    if (!f) throw data_error("short write: " + p.string());
}

inline void read_f32(const std::filesystem::path& p, float* data, int64_t n) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw data_error("cannot open: " + p.string());
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<int64_t>(f.tellg());
    if (bytes != n * 4)
        throw format_error(p.string() + ": payload is " + std::to_string(bytes) +
                           " bytes, header declares " + std::to_string(n * 4));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if (!f) throw format_error("short read: " + p.string());
}

} // namespace detail

// Writes <stem>.img.f32, <stem>.hgt.f32, <stem>.json. Payloads are raw
// little-endian float32; the sidecar JSON is the authoritative header.
inline void save_patch(const std::filesystem::path& stem, const patch& p) {
    std::filesystem::create_directories(stem.parent_path());
    detail::write_f32(std::filesystem::path(stem.string() + ".img.f32"),
                      p.image.data(), p.image.numel());
    detail::write_f32(std::filesystem::path(stem.string() + ".hgt.f32"),
                      p.heights.data(), p.heights.numel());
    nlohmann::json j;
    j["scene_id"] = p.meta.scene_id;
    j["gsd_m"] = p.meta.gsd_m;
    j["dtype"] = "float32";
    j["band_order"] = p.meta.band_order;
    j["shape"] = {p.image.dim(0), p.image.dim(1), p.image.dim(2)};
    std::ofstream f(stem.string() + ".json", std::ios::trunc);
    f << j.dump(2) << "\n";
}

// Accepts the sample stem or the path of any of its three files.
inline patch load_patch(const std::filesystem::path& path) {
    const auto stem = detail::sample_stem(path);
    const auto json_path = std::filesystem::path(stem.string() + ".json");
    const auto img_path = std::filesystem::path(stem.string() + ".img.f32");
    const auto hgt_path = std::filesystem::path(stem.string() + ".hgt.f32");

    if (!std::filesystem::exists(json_path))
        throw format_error("missing sidecar header: " + json_path.string());
    if (!std::filesystem::exists(img_path))
        throw data_error("missing image payload: " + img_path.string());
    if (!std::filesystem::exists(hgt_path))
        throw pairing_error("image has no paired height label: " + hgt_path.string());

    nlohmann::json j;
    {
        std::ifstream f(json_path);
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw format_error(json_path.string() + ": " + e.what());
        }
    }
    if (j.value("dtype", "") != "float32")
        throw format_error(json_path.string() + ": dtype must be float32");
    const auto shape = j.value("shape", std::vector<int64_t>{});
    if (shape != std::vector<int64_t>{kBands, kPatchSize, kPatchSize})
        throw format_error(json_path.string() + ": header shape must be [7,256,256]");

    patch p;
    p.image = tensor<float>({kBands, kPatchSize, kPatchSize});
    p.heights = tensor<float>({kPatchSize, kPatchSize});
    detail::read_f32(img_path, p.image.data(), p.image.numel());
    detail::read_f32(hgt_path, p.heights.data(), p.heights.numel());

    if (!p.image.all_finite())
        throw data_error(img_path.string() + ": non-finite reflectance values");
    if (!p.heights.all_finite())
        throw data_error(hgt_path.string() + ": non-finite height values");
    for (int64_t i = 0; i < p.heights.numel(); ++i)
        if (p.heights[i] < 0.0f)
            throw data_error(hgt_path.string() + ": negative reference height");

    p.meta.scene_id = j.value("scene_id", stem.filename().string());
    p.meta.gsd_m = j.value("gsd_m", kNativeGsdM);
    if (j.contains("band_order"))
        p.meta.band_order = j["band_order"].get<std::vector<std::string>>();

    p.valid_mask = derive_valid_mask(p.image);
    // NoData pixels carry height 0 by convention.
    for (int64_t i = 0; i < p.heights.numel(); ++i)
        if (p.valid_mask[i] == 0.0f) p.heights[i] = 0.0f;
    return p;
}

} // namespace tsonet::data
