#include <catch2/catch.hpp>

#include "tsonet/core/rng.hpp"
#include "tsonet/supervision.hpp"

#include "oracles.hpp"

using namespace tsonet;

namespace {

tensor<float> random_heights(rng& rg, int64_t n, double p_building = 0.4) {
    tensor<float> h({n, n});
    for (int64_t i = 0; i < h.numel(); ++i)
        h[i] = rg.uniform() < p_building ? float(rg.uniform(0.0, 12.0)) : 0.0f;
    return h;
}

tensor<float> random_binary(rng& rg, int64_t n, double p = 0.5) {
    tensor<float> b({n, n});
    for (int64_t i = 0; i < b.numel(); ++i) b[i] = rg.uniform() < p ? 1.0f : 0.0f;
    return b;
}

int64_t count_ones(const tensor<float>& t) {
    int64_t c = 0;
    for (int64_t i = 0; i < t.numel(); ++i) c += t[i] != 0.0f;
    return c;
}

} // namespace

TEST_CASE("footprint threshold is strict", "[supervision]") {
    tensor<float> h({1, 2});
    h[0] = 2.0f;
    h[1] = 2.1f;
    auto fp = derive_footprint_mask(h, 2.0f);
    REQUIRE(fp[0] == 0.0f);
    REQUIRE(fp[1] == 1.0f);
}

TEST_CASE("footprint matches the elementwise oracle on random maps", "[supervision]") {
    rng rg(5);
    for (int rep = 0; rep < 20; ++rep) {
        auto h = random_heights(rg, 16);
        auto fp = derive_footprint_mask(h, 2.0f);
        auto ref = oracle::footprint(h, 2.0f);
        for (int64_t i = 0; i < h.numel(); ++i) REQUIRE(fp[i] == ref[i]);
    }
}

TEST_CASE("erosion edge cases", "[supervision]") {
    SECTION("an isolated pixel is erased") {
        tensor<float> fp({7, 7}, 0.0f);
        fp.at(3, 3) = 1.0f;
        auto in = erode_footprint(fp);
        REQUIRE(count_ones(in) == 0);
    }
    SECTION("a 3x3 block keeps only its center") {
        tensor<float> fp({8, 8}, 0.0f);
        for (int64_t y = 2; y < 5; ++y)
            for (int64_t x = 2; x < 5; ++x) fp.at(y, x) = 1.0f;
        auto in = erode_footprint(fp);
        REQUIRE(count_ones(in) == 1);
        REQUIRE(in.at(3, 3) == 1.0f);
        auto ref = oracle::erode(fp);
        for (int64_t i = 0; i < fp.numel(); ++i) REQUIRE(in[i] == ref[i]);
    }
    SECTION("a full frame of ones survives at the borders") {
        tensor<float> fp({6, 6}, 1.0f);
        auto in = erode_footprint(fp);
        REQUIRE(count_ones(in) == 36);
        auto ref = oracle::erode(fp);
        for (int64_t i = 0; i < fp.numel(); ++i) REQUIRE(in[i] == ref[i]);
    }
}

TEST_CASE("erosion equals the binary-morphology oracle on random maps", "[supervision]") {
    rng rg(9);
    for (int rep = 0; rep < 50; ++rep) {
        auto fp = random_binary(rg, 16);
        auto in = erode_footprint(fp);
        auto ref = oracle::erode(fp);
        for (int64_t i = 0; i < fp.numel(); ++i) REQUIRE(in[i] == ref[i]);
        // erosion shrinks
        REQUIRE(count_ones(in) <= count_ones(fp));
        // interior is inside the footprint
        for (int64_t i = 0; i < fp.numel(); ++i) REQUIRE(in[i] <= fp[i]);
    }
}

TEST_CASE("double erosion equals the oracle applied twice", "[supervision]") {
    rng rg(13);
    for (int rep = 0; rep < 10; ++rep) {
        auto fp = random_binary(rg, 12);
        auto twice = erode_footprint(erode_footprint(fp));
        auto ref = oracle::erode(oracle::erode(fp));
        for (int64_t i = 0; i < fp.numel(); ++i) REQUIRE(twice[i] == ref[i]);
    }
}

TEST_CASE("weight map values", "[supervision]") {
    SECTION("all-interior gives all ones") {
        tensor<float> in({4, 4}, 1.0f);
        auto w = build_weight_map(in, 0.1f);
        for (int64_t i = 0; i < w.numel(); ++i) REQUIRE(w[i] == 1.0f);
    }
    SECTION("no interior gives alpha everywhere") {
        tensor<float> in({4, 4}, 0.0f);
        auto w = build_weight_map(in, 0.1f);
        for (int64_t i = 0; i < w.numel(); ++i) REQUIRE(w[i] == 0.1f);
    }
    SECTION("mixed maps take exactly two values") {
        rng rg(3);
        auto in = random_binary(rg, 8);
        auto w = build_weight_map(in, 0.1f);
        for (int64_t i = 0; i < w.numel(); ++i)
            REQUIRE((w[i] == 0.1f || w[i] == 1.0f));
    }
    SECTION("alpha outside (0,1] is a config error") {
        tensor<float> in({2, 2}, 0.0f);
        REQUIRE_THROWS_AS(build_weight_map(in, 0.0f), config_error);
        REQUIRE_THROWS_AS(build_weight_map(in, 1.5f), config_error);
    }
}

TEST_CASE("raising a height never clears its footprint bit", "[supervision]") {
    rng rg(17);
    auto h = random_heights(rg, 12);
    auto fp0 = derive_footprint_mask(h, 2.0f);
    for (int rep = 0; rep < 40; ++rep) {
        const int64_t i = rg.uniform_int(0, h.numel() - 1);
        h[i] += float(rg.uniform(0.0, 5.0));
        auto fp1 = derive_footprint_mask(h, 2.0f);
        for (int64_t j = 0; j < h.numel(); ++j) REQUIRE(fp1[j] >= fp0[j]);
        fp0 = fp1;
    }
}

TEST_CASE("derive_supervision composes the three maps", "[supervision]") {
    rng rg(23);
    auto h = random_heights(rg, 16);
    auto s = derive_supervision(h, 2.0f, 0.1f);
    for (int64_t i = 0; i < h.numel(); ++i) {
        REQUIRE(s.interior[i] <= s.footprint[i]);
        REQUIRE(s.weights[i] == (s.interior[i] != 0.0f ? 1.0f : 0.1f));
    }
}
