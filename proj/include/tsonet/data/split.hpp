#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsonet/core/error.hpp"
#include "tsonet/core/rng.hpp"

namespace tsonet::data {

enum class split_kind { train, val, test };

inline const char* split_name(split_kind k) {
    switch (k) {
        case split_kind::train: return "train";
        case split_kind::val: return "val";
        case split_kind::test: return "test";
    }
    return "?";
}

inline split_kind parse_split(const std::string& s) {
    if (s == "train") return split_kind::train;
    if (s == "val") return split_kind::val;
    if (s == "test") return split_kind::test;
    throw config_error("unknown split name: " + s);
}

struct split_entry {
    std::string sample_path; // stem, relative to the dataset root
    split_kind split;
};

struct split_manifest {
    std::vector<split_entry> entries;
    uint64_t seed = 0;
    std::array<double, 3> ratios = {0.7, 0.2, 0.1};

    std::vector<std::string> paths(split_kind k) const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (e.split == k) out.push_back(e.sample_path);
        return out;
    }

    std::array<int64_t, 3> counts() const {
        std::array<int64_t, 3> c = {0, 0, 0};
        for (const auto& e : entries) ++c[static_cast<size_t>(e.split)];
        return c;
    }
};

// Deterministic split: sort paths, seeded shuffle, contiguous slices with
// floor-allocated counts; the remainder goes to train. Sorting first makes
// the result independent of the input order.
inline split_manifest split_dataset(std::vector<std::string> paths,
                                    std::array<double, 3> ratios, uint64_t seed) {
    const double rsum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(rsum - 1.0) > 1e-9)
        throw config_error("split ratios must sum to 1, got " + std::to_string(rsum));
    for (double r : ratios)
        if (r < 0.0) throw config_error("split ratios must be non-negative");
    if (paths.size() < 10)
        throw config_error("split needs at least 10 entries, got " + std::to_string(paths.size()));

    std::sort(paths.begin(), paths.end());
    for (size_t i = 1; i < paths.size(); ++i)
        if (paths[i] == paths[i - 1]) throw config_error("duplicate sample path: " + paths[i]);

    rng rg(seed);
    rg.shuffle(paths);

    const int64_t n = static_cast<int64_t>(paths.size());
    int64_t n_val = static_cast<int64_t>(std::floor(ratios[1] * static_cast<double>(n)));
    int64_t n_test = static_cast<int64_t>(std::floor(ratios[2] * static_cast<double>(n)));
    int64_t n_train = static_cast<int64_t>(std::floor(ratios[0] * static_cast<double>(n)));
    n_train += n - (n_train + n_val + n_test);

    split_manifest m;
    m.seed = seed;
    m.ratios = ratios;
    m.entries.reserve(paths.size());
    for (int64_t i = 0; i < n; ++i) {
        split_kind k = split_kind::test;
        if (i < n_train) k = split_kind::train;
        else if (i < n_train + n_val) k = split_kind::val;
        m.entries.push_back({paths[static_cast<size_t>(i)], k});
    }
    return m;
}

inline void save_manifest(const split_manifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["ratios"] = m.ratios;
    auto& arr = j["entries"] = nlohmann::json::array();
    for (const auto& e : m.entries)
        arr.push_back({{"sample_path", e.sample_path}, {"split", split_name(e.split)}});
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw data_error("cannot write manifest: " + path.string());
    f << j.dump(2) << "\n";
}

inline split_manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw data_error("missing manifest: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path.string() + ": " + e.what());
    }
    split_manifest m;
    m.seed = j.value("seed", uint64_t{0});
    if (j.contains("ratios")) m.ratios = j["ratios"].get<std::array<double, 3>>();
    for (const auto& e : j.at("entries"))
        m.entries.push_back({e.at("sample_path").get<std::string>(),
                             parse_split(e.at("split").get<std::string>())});
    return m;
}

} // namespace tsonet::data
