#include <doctest.h>

#include "dicti/maskgen.hpp"
#include "support/oracles.hpp"

using namespace dicti;

namespace {

BinaryMask from_points(int w, int h, std::initializer_list<std::pair<int, int>> pts) {
    BinaryMask m(w, h);
    for (auto [x, y] : pts) m.set(x, y, true);
    return m;
}

MaskGenConfig cfg_with(int d, int e, int f) {
    MaskGenConfig c;
    c.d = d;
    c.e = e;
    c.f = f;
    return c;
}

}  // namespace

TEST_CASE("disk structuring element") {
    SUBCASE("radius 0 is the origin only") {
        const auto se = StructuringElement::disk(0);
        REQUIRE(se.offsets().size() == 1);
        CHECK(se.offsets()[0] == std::pair{0, 0});
    }
    SUBCASE("membership is the closed disk, symmetric, contains the origin") {
        for (int r : {1, 2, 3, 5, 7, 12}) {
            const auto se = StructuringElement::disk(r);
            std::set<std::pair<int, int>> got(se.offsets().begin(), se.offsets().end());
            std::set<std::pair<int, int>> want;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx * dx + dy * dy <= r * r) want.insert({dx, dy});
                }
            }
            CHECK(got == want);
            CHECK(got.count({0, 0}) == 1);
            for (auto [dx, dy] : got) CHECK(got.count({-dx, -dy}) == 1);
        }
    }
    SUBCASE("boundary points at exactly r^2 are included") {
        const auto se = StructuringElement::disk(5);
        std::set<std::pair<int, int>> got(se.offsets().begin(), se.offsets().end());
        CHECK(got.count({3, 4}) == 1);
        CHECK(got.count({5, 0}) == 1);
        CHECK(got.count({4, 4}) == 0);
    }
    CHECK_THROWS_AS(StructuringElement::disk(-1), ContractViolation);
}

TEST_CASE("mask_from_labels") {
    SUBCASE("all-zero map yields an empty mask") {
        const LabelMap labels(5, 5, 0);
        CHECK_FALSE(mask_from_labels(labels, LabelSet{1}).any());
    }
    SUBCASE("single matching pixel") {
        LabelMap labels(5, 5, 0);
        labels.set(2, 2, 1);
        CHECK(mask_from_labels(labels, LabelSet{1}) == from_points(5, 5, {{2, 2}}));
    }
    SUBCASE("random map matches a per-pixel membership loop") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            const LabelMap labels = fixture::random_labels(rng, 8, 8);
            CHECK(mask_from_labels(labels, LabelSet{3, 4}) == oracle::select_labels(labels, {3, 4}));
        }
    }
    SUBCASE("empty include set") {
        std::mt19937_64 rng(12);
        CHECK_FALSE(mask_from_labels(fixture::random_labels(rng, 8, 8), LabelSet{}).any());
    }
}

TEST_CASE("label sets reject labels outside 1..24") {
    CHECK_THROWS_AS(LabelSet{0}, ContractViolation);
    CHECK_THROWS_AS(LabelSet{25}, ContractViolation);
    CHECK(LabelSet{24, 1}.to_vector() == std::vector<int>{1, 24});
}

TEST_CASE("dilate") {
    std::mt19937_64 rng(21);
    SUBCASE("radius 0 is identity") {
        const auto m = fixture::random_mask(rng, 13, 9, 0.3);
        CHECK(dilate(m, 0) == m);
    }
    SUBCASE("single pixel, radius 1 gives a plus shape") {
        const auto m = from_points(5, 5, {{2, 2}});
        CHECK(dilate(m, 1) == from_points(5, 5, {{2, 2}, {1, 2}, {3, 2}, {2, 1}, {2, 3}}));
        CHECK(dilate(m, 1) == oracle::dilate(m, 1));
    }
    SUBCASE("empty mask stays empty") {
        for (int r : {0, 1, 4, 40}) CHECK_FALSE(dilate(BinaryMask(9, 9), r).any());
    }
    SUBCASE("negative radius is rejected") {
        CHECK_THROWS_AS(dilate(BinaryMask(3, 3), -1), ContractViolation);
    }
    SUBCASE("radius larger than the image") {
        const auto m = from_points(6, 4, {{0, 0}});
        CHECK(dilate(m, 50) == BinaryMask(6, 4, true));
    }
}

TEST_CASE("erode") {
    std::mt19937_64 rng(22);
    SUBCASE("radius 0 is identity") {
        const auto m = fixture::random_mask(rng, 13, 9, 0.7);
        CHECK(erode(m, 0) == m);
    }
    SUBCASE("full mask erodes at the border") {
        BinaryMask want(5, 5);
        for (int y = 1; y <= 3; ++y) {
            for (int x = 1; x <= 3; ++x) want.set(x, y, true);
        }
        CHECK(erode(BinaryMask(5, 5, true), 1) == want);
        CHECK(oracle::erode(BinaryMask(5, 5, true), 1) == want);
    }
    SUBCASE("single pixel vanishes") {
        CHECK_FALSE(erode(from_points(5, 5, {{2, 2}}), 1).any());
    }
    SUBCASE("output is a subset of the input") {
        for (int r : {1, 2, 3}) {
            const auto m = fixture::random_mask(rng, 20, 20, 0.8);
            CHECK(erode(m, r).subset_of(m));
        }
    }
}

TEST_CASE("morphology matches the disk-scan oracle on random masks") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 24);
        const int h = 1 + static_cast<int>(rng() % 24);
        const auto m = fixture::random_mask(rng, w, h, 0.1 + 0.8 * (trial % 5) / 4.0);
        for (int r : {0, 1, 2, 3, 5, 7, 9}) {
            CHECK(dilate(m, r) == oracle::dilate(m, r));
            CHECK(erode(m, r) == oracle::erode(m, r));
        }
    }
}

TEST_CASE("dilation is monotone and erosion anti-monotone in the radius") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = fixture::random_mask(rng, 30, 30, 0.15);
        const auto full = fixture::random_mask(rng, 30, 30, 0.9);
        for (int r = 0; r < 6; ++r) {
            CHECK(dilate(m, r).subset_of(dilate(m, r + 1)));
            CHECK(erode(full, r + 1).subset_of(erode(full, r)));
        }
    }
}

TEST_CASE("inpainting_mask") {
    SUBCASE("all-background map gives an empty mask") {
        for (int d : {0, 5, 70}) CHECK_FALSE(inpainting_mask(LabelMap(9, 9, 0), cfg_with(d, 3, 1)).any());
    }
    SUBCASE("torso pixel with d=1 and nothing preserved gives a plus") {
        LabelMap labels(5, 5, 0);
        labels.set(2, 2, 1);
        CHECK(inpainting_mask(labels, cfg_with(1, 0, 0)) ==
              from_points(5, 5, {{2, 2}, {1, 2}, {3, 2}, {2, 1}, {2, 3}}));
    }
    SUBCASE("torso and hand pixels, d=0 e=0 keeps only the torso") {
        LabelMap labels(5, 5, 0);
        labels.set(2, 2, 1);
        labels.set(2, 3, 4);
        CHECK(inpainting_mask(labels, cfg_with(0, 0, 0)) == from_points(5, 5, {{2, 2}}));
    }
    SUBCASE("dilated body never overlaps the eroded preserved region") {
        std::mt19937_64 rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            const auto labels = fixture::random_labels(rng, 24, 24);
            const auto cfg = cfg_with(4, 1, 1);
            const auto preserved = erode(mask_from_labels(labels, cfg.preserved_labels), cfg.e);
            CHECK_FALSE((inpainting_mask(labels, cfg) & preserved).any());
        }
    }
    SUBCASE("grows with d at fixed e") {
        std::mt19937_64 rng(32);
        for (int trial = 0; trial < 10; ++trial) {
            const auto labels = fixture::random_labels(rng, 32, 32);
            BinaryMask prev = inpainting_mask(labels, cfg_with(0, 2, 1));
            for (int d : {1, 3, 6, 10}) {
                const auto cur = inpainting_mask(labels, cfg_with(d, 2, 1));
                CHECK(prev.subset_of(cur));
                prev = cur;
            }
        }
    }
}

TEST_CASE("head_mask") {
    LabelMap labels(7, 7, 0);
    for (int y = 2; y <= 4; ++y) {
        for (int x = 2; x <= 4; ++x) labels.set(x, y, 23);
    }
    SUBCASE("no head labels") { CHECK_FALSE(head_mask(LabelMap(7, 7, 1), cfg_with(0, 0, 0)).any()); }
    SUBCASE("f=0 keeps the 3x3 block") {
        CHECK(head_mask(labels, cfg_with(0, 0, 0)) == mask_from_labels(labels, LabelSet{23}));
        CHECK(head_mask(labels, cfg_with(0, 0, 0)).count() == 9);
    }
    SUBCASE("f=1 keeps only the centre") {
        CHECK(head_mask(labels, cfg_with(0, 0, 1)) == from_points(7, 7, {{3, 3}}));
    }
    SUBCASE("always inside the head labels") {
        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 10; ++trial) {
            const auto l = fixture::random_labels(rng, 20, 20);
            const auto cfg = cfg_with(0, 0, static_cast<int>(trial % 3));
            CHECK(head_mask(l, cfg).subset_of(mask_from_labels(l, cfg.head_labels)));
        }
    }
}

TEST_CASE("config validation") {
    CHECK_NOTHROW(MaskGenConfig{}.validate());
    CHECK_THROWS_WITH_AS(cfg_with(-1, 0, 0).validate(), doctest::Contains("d:"), ContractViolation);
    CHECK_THROWS_WITH_AS(cfg_with(0, -1, 0).validate(), doctest::Contains("e:"), ContractViolation);
    CHECK_THROWS_WITH_AS(cfg_with(0, 0, -1).validate(), doctest::Contains("f:"), ContractViolation);
    MaskGenConfig overlap;
    overlap.head_labels = LabelSet{1, 23};
    CHECK_THROWS_AS(overlap.validate(), ContractViolation);
    const MaskGenConfig defaults;
    CHECK(defaults.d == 70);
    CHECK(defaults.preserved_labels.to_vector() == std::vector<int>{3, 4, 5, 6});
    CHECK(defaults.head_labels.to_vector() == std::vector<int>{23, 24});
}
