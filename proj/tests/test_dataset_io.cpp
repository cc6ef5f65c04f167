#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "tsonet/data/patch.hpp"
#include "tsonet/data/split.hpp"
#include "tsonet/data/synthetic.hpp"
#include "tsonet/data/transforms.hpp"

#include "oracles.hpp"

using namespace tsonet;
using namespace tsonet::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("tsonet_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

synthetic_scene_spec small_spec() {
    synthetic_scene_spec s;
    s.n_buildings_min = 2;
    s.n_buildings_max = 5;
    return s;
}

} // namespace

TEST_CASE("patch save/load round trip is bit exact", "[dataset]") {
    auto dir = fresh_dir("roundtrip");
    auto p = generate_synthetic_scene(small_spec(), 42);
    save_patch(dir / "samples" / "a", p);
    auto q = load_patch(dir / "samples" / "a.json");

    REQUIRE(q.bands() == 7);
    REQUIRE(q.height() == 256);
    REQUIRE(q.width() == 256);
    REQUIRE(std::equal(p.image.data(), p.image.data() + p.image.numel(), q.image.data()));
    REQUIRE(std::equal(p.heights.data(), p.heights.data() + p.heights.numel(), q.heights.data()));
    REQUIRE(q.meta.gsd_m == Approx(4.75f));
    REQUIRE(q.meta.band_order.size() == 7);
}

TEST_CASE("all-zero label loads as an empty scene", "[dataset]") {
    auto dir = fresh_dir("empty");
    auto p = generate_synthetic_scene(small_spec(), 1);
    p.heights.fill(0.0f);
    save_patch(dir / "s", p);
    auto q = load_patch(dir / "s");
    int64_t building = 0;
    for (int64_t i = 0; i < q.heights.numel(); ++i) {
        REQUIRE(q.heights[i] == 0.0f);
        if (q.heights[i] > 0.0f) ++building;
    }
    REQUIRE(building == 0);
}

TEST_CASE("NoData column zeroes the valid mask, against a pixel-scan oracle", "[dataset]") {
    auto dir = fresh_dir("nodata");
    auto p = generate_synthetic_scene(small_spec(), 7);
    const int64_t col = 100;
    for (int64_t b = 0; b < 7; ++b)
        for (int64_t y = 0; y < 256; ++y) p.image.at(b, y, col) = 0.0f;
    save_patch(dir / "s", p);
    auto q = load_patch(dir / "s");

    // Independent oracle: scan every pixel over every band.
    for (int64_t y = 0; y < 256; ++y) {
        for (int64_t x = 0; x < 256; ++x) {
            bool any_nonzero = false;
            for (int64_t b = 0; b < 7; ++b)
                if (q.image.at(b, y, x) != 0.0f) any_nonzero = true;
            REQUIRE(q.valid_mask.at(y, x) == (any_nonzero ? 1.0f : 0.0f));
        }
    }
    for (int64_t y = 0; y < 256; ++y) REQUIRE(q.valid_mask.at(y, col) == 0.0f);
}

TEST_CASE("loader error taxonomy", "[dataset]") {
    auto dir = fresh_dir("errors");
    auto p = generate_synthetic_scene(small_spec(), 3);

    SECTION("declared shape mismatch is a format error") {
        save_patch(dir / "s", p);
        {
            std::ofstream f(dir / "s.json", std::ios::trunc);
            f << R"({"scene_id":"s","gsd_m":4.75,"dtype":"float32","shape":[7,128,128]})";
        }
        REQUIRE_THROWS_AS(load_patch(dir / "s"), format_error);
    }
    SECTION("truncated payload is a format error") {
        save_patch(dir / "s", p);
        fs::resize_file(dir / "s.img.f32", 1000);
        REQUIRE_THROWS_AS(load_patch(dir / "s"), format_error);
    }
    SECTION("non-finite values are a data error") {
        p.image[12345] = std::numeric_limits<float>::quiet_NaN();
        save_patch(dir / "s", p);
        REQUIRE_THROWS_AS(load_patch(dir / "s"), data_error);
    }
    SECTION("missing paired label is a pairing error") {
        save_patch(dir / "s", p);
        fs::remove(dir / "s.hgt.f32");
        REQUIRE_THROWS_AS(load_patch(dir / "s"), pairing_error);
    }
    SECTION("missing sidecar is a format error") {
        save_patch(dir / "s", p);
        fs::remove(dir / "s.json");
        REQUIRE_THROWS_AS(load_patch(dir / "s"), format_error);
    }
}

TEST_CASE("split counts, determinism, permutation invariance", "[dataset]") {
    SECTION("10 entries at 7:2:1 give exactly (7,2,1)") {
        std::vector<std::string> paths;
        for (int i = 0; i < 10; ++i) paths.push_back("s" + std::to_string(i));
        auto m = split_dataset(paths, {0.7, 0.2, 0.1}, 0);
        auto c = m.counts();
        REQUIRE(c[0] == 7);
        REQUIRE(c[1] == 2);
        REQUIRE(c[2] == 1);
    }
    SECTION("identical inputs and seed give identical assignment") {
        std::vector<std::string> paths;
        for (int i = 0; i < 37; ++i) paths.push_back("p" + std::to_string(i));
        auto a = split_dataset(paths, {0.7, 0.2, 0.1}, 99);
        auto b = split_dataset(paths, {0.7, 0.2, 0.1}, 99);
        REQUIRE(a.entries.size() == b.entries.size());
        for (size_t i = 0; i < a.entries.size(); ++i) {
            REQUIRE(a.entries[i].sample_path == b.entries[i].sample_path);
            REQUIRE(a.entries[i].split == b.entries[i].split);
        }
    }
    SECTION("9475 entries match hand-computed floor/remainder allocation") {
        std::vector<std::string> paths;
        for (int i = 0; i < 9475; ++i) paths.push_back("q" + std::to_string(100000 + i));
        auto m = split_dataset(paths, {0.7, 0.2, 0.1}, 1);
        auto c = m.counts();
        // floor(0.7*9475)=6632, floor(0.2*9475)=1895, floor(0.1*9475)=947,
        // remainder of 1 goes to train.
        REQUIRE(c[0] == 6633);
        REQUIRE(c[1] == 1895);
        REQUIRE(c[2] == 947);
        REQUIRE(std::abs(c[0] - 6632) <= 1);
        REQUIRE(std::abs(c[1] - 1895) <= 1);
        REQUIRE(std::abs(c[2] - 948) <= 1);
    }
    SECTION("input order does not matter") {
        std::vector<std::string> paths;
        for (int i = 0; i < 23; ++i) paths.push_back("x" + std::to_string(i));
        auto a = split_dataset(paths, {0.7, 0.2, 0.1}, 5);
        std::reverse(paths.begin(), paths.end());
        auto b = split_dataset(paths, {0.7, 0.2, 0.1}, 5);
        for (size_t i = 0; i < a.entries.size(); ++i) {
            REQUIRE(a.entries[i].sample_path == b.entries[i].sample_path);
            REQUIRE(a.entries[i].split == b.entries[i].split);
        }
    }
    SECTION("bad ratios are a config error") {
        std::vector<std::string> paths(12);
        for (int i = 0; i < 12; ++i) paths[i] = "y" + std::to_string(i);
        REQUIRE_THROWS_AS(split_dataset(paths, {0.7, 0.2, 0.2}, 0), config_error);
    }
    SECTION("manifest round trip") {
        auto dir = fresh_dir("manifest");
        std::vector<std::string> paths;
        for (int i = 0; i < 12; ++i) paths.push_back("m" + std::to_string(i));
        auto m = split_dataset(paths, {0.7, 0.2, 0.1}, 4);
        save_manifest(m, dir / "manifest.json");
        auto l = load_manifest(dir / "manifest.json");
        REQUIRE(l.entries.size() == m.entries.size());
        REQUIRE(l.seed == 4);
        for (size_t i = 0; i < m.entries.size(); ++i)
            REQUIRE(l.entries[i].split == m.entries[i].split);
    }
}

TEST_CASE("synthetic scene generation", "[dataset]") {
    SECTION("zero buildings give an all-zero height map") {
        auto s = small_spec();
        s.n_buildings_min = s.n_buildings_max = 0;
        auto p = generate_synthetic_scene(s, 11);
        for (int64_t i = 0; i < p.heights.numel(); ++i) REQUIRE(p.heights[i] == 0.0f);
        for (int64_t i = 0; i < p.valid_mask.numel(); ++i) REQUIRE(p.valid_mask[i] == 1.0f);
    }
    SECTION("one 10x10 building of height 20 covers exactly 100 pixels") {
        synthetic_scene_spec s;
        s.n_buildings_min = s.n_buildings_max = 1;
        s.footprint_px_min = s.footprint_px_max = 10;
        s.height_median_m = 20.0;
        s.height_sigma = 0.0;
        auto p = generate_synthetic_scene(s, 13);
        int64_t n20 = 0, nz = 0;
        for (int64_t i = 0; i < p.heights.numel(); ++i) {
            if (p.heights[i] == 20.0f) ++n20;
            else if (p.heights[i] != 0.0f) ++nz;
        }
        REQUIRE(n20 == 100);
        REQUIRE(nz == 0);
    }
    SECTION("same seed is bit-identical") {
        auto a = generate_synthetic_scene(small_spec(), 77);
        auto b = generate_synthetic_scene(small_spec(), 77);
        REQUIRE(std::equal(a.image.data(), a.image.data() + a.image.numel(), b.image.data()));
        REQUIRE(std::equal(a.heights.data(), a.heights.data() + a.heights.numel(),
                           b.heights.data()));
    }
    SECTION("degenerate spec is a config error") {
        auto s = small_spec();
        s.footprint_px_min = 0;
        s.footprint_px_max = 0;
        REQUIRE_THROWS_AS(generate_synthetic_scene(s, 0), config_error);
    }
}

TEST_CASE("resolution degradation", "[dataset]") {
    auto p = generate_synthetic_scene(small_spec(), 21);

    SECTION("native target is the identity") {
        auto q = degrade_resolution(p, 4.75f);
        REQUIRE(std::equal(p.image.data(), p.image.data() + p.image.numel(), q.image.data()));
        REQUIRE(q.meta.gsd_m == Approx(4.75f));
    }
    SECTION("a constant band stays constant") {
        patch c = p;
        for (int64_t i = 0; i < 256 * 256; ++i) c.image[i] = 0.6f;
        auto q = degrade_resolution(c, 30.0f);
        for (int64_t i = 0; i < 256 * 256; ++i)
            REQUIRE(q.image[i] == Approx(0.6f).margin(1e-6));
    }
    SECTION("impulse response at 30 m matches the two-stage oracle") {
        patch imp = p;
        imp.image.fill(0.0f);
        imp.image.at(0, 130, 140) = 1.0f;
        // keep another band nonzero so no pixel hits the NoData sentinel
        for (int64_t i = 0; i < 256 * 256; ++i) imp.image[6 * 256 * 256 + i] = 0.5f;
        auto q = degrade_resolution(imp, 30.0f);

        std::vector<double> band0(256 * 256, 0.0);
        band0[130 * 256 + 140] = 1.0;
        const int64_t small = std::llround(256.0 / (30.0 / 4.75));
        auto down = oracle::area_down_1band(band0, 256, 256, small, small);
        auto up = oracle::bilinear_up_1band(down, small, small, 256, 256);
        for (int64_t i = 0; i < 256 * 256; ++i)
            REQUIRE(double(q.image[i]) == Approx(up[size_t(i)]).margin(1e-6));
    }
    SECTION("per-band mean is preserved within 1e-4 relative") {
        auto q = degrade_resolution(p, 10.0f);
        for (int64_t b = 0; b < 7; ++b) {
            double m0 = 0, m1 = 0;
            for (int64_t i = 0; i < 256 * 256; ++i) {
                m0 += p.image[b * 256 * 256 + i];
                m1 += q.image[b * 256 * 256 + i];
            }
            REQUIRE(m1 == Approx(m0).epsilon(1e-4));
        }
        REQUIRE(std::equal(p.heights.data(), p.heights.data() + p.heights.numel(),
                           q.heights.data()));
    }
    SECTION("finer-than-native target is a config error") {
        REQUIRE_THROWS_AS(degrade_resolution(p, 2.0f), config_error);
    }
}

TEST_CASE("band selection", "[dataset]") {
    auto p = generate_synthetic_scene(small_spec(), 33);

    SECTION("ALL7 is the identity") {
        auto q = select_bands(p, band_set::all7);
        REQUIRE(q.bands() == 7);
        REQUIRE(std::equal(p.image.data(), p.image.data() + p.image.numel(), q.image.data()));
    }
    SECTION("RGB picks 665/560/490 nm") {
        auto q = select_bands(p, band_set::rgb);
        REQUIRE(q.bands() == 3);
        REQUIRE(q.meta.band_order == std::vector<std::string>{"MS3", "MS2", "MS1"});
        const auto& bands = phisat2_bands();
        double wl[3] = {0, 0, 0};
        for (int i = 0; i < 3; ++i)
            for (const auto& b : bands)
                if (q.meta.band_order[size_t(i)] == b.name) wl[i] = b.center_nm;
        REQUIRE(wl[0] == 665.0);
        REQUIRE(wl[1] == 560.0);
        REQUIRE(wl[2] == 490.0);
    }
    SECTION("RGB_NIR includes the 842 nm band") {
        auto q = select_bands(p, band_set::rgb_nir);
        REQUIRE(q.bands() == 4);
        REQUIRE(q.meta.band_order.back() == "MS7");
        REQUIRE(phisat2_bands()[6].center_nm == 842.0);
    }
    SECTION("every output band is a verbatim copy of an input band") {
        auto q = select_bands(p, band_set::rgb_nir);
        const int64_t hw = 256 * 256;
        const int64_t src[4] = {2, 1, 0, 6};
        for (int i = 0; i < 4; ++i)
            REQUIRE(std::equal(q.image.data() + i * hw, q.image.data() + (i + 1) * hw,
                               p.image.data() + src[i] * hw));
    }
}

TEST_CASE("band table matches the sensor definition", "[dataset]") {
    const auto& t = phisat2_bands();
    REQUIRE(t.size() == 7);
    for (size_t i = 1; i < t.size(); ++i) REQUIRE(t[i].center_nm > t[i - 1].center_nm);
    REQUIRE(t[0].center_nm == 490.0);
    REQUIRE(t[6].center_nm == 842.0);
    REQUIRE(t[6].bandwidth_nm == 115.0);
}
