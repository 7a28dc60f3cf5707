#include <doctest.h>

#include <fstream>
#include <set>

#include "dicti/image_io.hpp"
#include "dicti/pipeline.hpp"
#include "support/oracles.hpp"

using namespace dicti;

namespace {

std::vector<std::string> parser_command(const std::string& mode = "torso") {
    return {"python3", std::string(DICTI_TEST_TOOLS_DIR) + "/fake_parser.py", "--mode", mode};
}

MaskGenConfig small_masks(int d) {
    MaskGenConfig cfg;
    cfg.d = d;
    cfg.e = 1;
    cfg.f = 1;
    return cfg;
}

SynthesisParams one_variation(std::uint64_t seed = 3) {
    SynthesisParams p;
    p.seed = seed;
    p.variations = 1;
    return p;
}

}  // namespace

TEST_CASE("stitch examples") {
    std::mt19937_64 rng(21);
    const auto gen = fixture::random_image(rng, 6, 4);
    const auto src = fixture::random_image(rng, 6, 4);
    CHECK(stitch(gen, src, BinaryMask(6, 4, true)) == src);
    CHECK(stitch(gen, src, BinaryMask(6, 4, false)) == gen);

    BinaryMask left(6, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 3; ++x) left.set(x, y, true);
    }
    const auto out = stitch(gen, src, left);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) {
            const auto* want = x < 3 ? src.at(x, y) : gen.at(x, y);
            for (int c = 0; c < 3; ++c) CHECK(out.at(x, y)[c] == want[c]);
        }
    }
    CHECK_THROWS_AS(stitch(gen, fixture::random_image(rng, 5, 4), left), ContractViolation);
    CHECK_THROWS_AS(stitch(gen, src, BinaryMask(6, 5)), ContractViolation);
}

TEST_CASE("stitch matches the per-pixel oracle") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> dim(1, 24);
        const int w = dim(rng), h = dim(rng);
        const auto gen = fixture::random_image(rng, w, h);
        const auto src = fixture::random_image(rng, w, h);
        const auto head = fixture::random_mask(rng, w, h, 0.4);
        CHECK(stitch(gen, src, head) == oracle::stitch(gen, src, head));
    }
}

TEST_CASE("edit_image changes only M_i minus M_h") {
    const auto p = fixture::person(64, 64);
    StubBackend backend;
    const auto cfg = small_masks(3);
    const auto result = edit_image(p.image, p.labels, "a red dress", cfg, one_variation(), backend);
    REQUIRE(result.edited.size() == 1);
    const auto mi = oracle::subtract(
        oracle::dilate(oracle::select_labels(p.labels, {1, 2, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22}), 3),
        oracle::erode(oracle::select_labels(p.labels, {3, 4, 5, 6}), 1));
    const auto mh = oracle::erode(oracle::select_labels(p.labels, {23, 24}), 1);
    CHECK(result.masks.inpaint == mi);
    CHECK(result.masks.head == mh);

    const auto& out = result.edited[0];
    std::size_t changed = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const bool differs = !std::equal(out.at(x, y), out.at(x, y) + 3, p.image.at(x, y));
            if (differs) {
                ++changed;
                CHECK(mi.get(x, y));
                CHECK_FALSE(mh.get(x, y));
            }
        }
    }
    CHECK(changed > 0);
}

TEST_CASE("edit_image errors") {
    const auto p = fixture::person(32, 32);
    StubBackend backend;
    CHECK_THROWS_AS(edit_image(p.image, LabelMap(32, 32, 0), "x", small_masks(3), one_variation(), backend),
                    NoSubjectError);
    // Only a head: the body mask is empty.
    LabelMap head_only(32, 32, 0);
    head_only.set(10, 10, 23);
    CHECK_THROWS_AS(edit_image(p.image, head_only, "x", small_masks(3), one_variation(), backend), NoSubjectError);
    CHECK_THROWS_AS(edit_image(p.image, p.labels, "", small_masks(3), one_variation(), backend), ContractViolation);
    CHECK_THROWS_AS(edit_image(p.image, LabelMap(31, 32, 1), "x", small_masks(3), one_variation(), backend),
                    ContractViolation);
}

TEST_CASE("run_edit end to end") {
    const auto p = fixture::person(64, 64);
    const auto dir = fixture::temp_dir("run-edit");
    save_png(dir / "person.png", p.image);
    save_png(dir / "labels.png", p.labels);

    EditJobSpec spec;
    spec.image = dir / "person.png";
    spec.labels = dir / "labels.png";
    spec.prompt = "a green coat";
    spec.masks = small_masks(4);
    spec.synthesis.seed = 11;
    spec.synthesis.variations = 2;
    spec.output_dir = dir / "a";

    PrecomputedLabels parser;
    StubBackend backend;
    const auto first = run_edit(spec, parser, backend);
    CHECK(first.edited.size() == 2);
    CHECK(first.edited[0] != first.edited[1]);
    for (const char* f : {"edited_0.png", "edited_1.png", "mask_inpaint.png", "mask_head.png", "garment_0.png",
                          "garment_1.png"}) {
        CHECK(std::filesystem::exists(spec.output_dir / f));
    }

    spec.output_dir = dir / "b";
    spec.persist_intermediates = false;
    const auto second = run_edit(spec, parser, backend);
    CHECK(second.edited == first.edited);
    CHECK(read_file(dir / "a" / "edited_0.png") == read_file(dir / "b" / "edited_0.png"));
    CHECK_FALSE(std::filesystem::exists(dir / "b" / "mask_inpaint.png"));

    // Head preservation against the source pixels.
    for (const auto& img : first.edited) {
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                if (first.masks.head.get(x, y)) CHECK(std::equal(img.at(x, y), img.at(x, y) + 3, p.image.at(x, y)));
            }
        }
    }

    SUBCASE("working resolution") {
        spec.working_size = 32;
        spec.output_dir.clear();
        const auto small = run_edit(spec, parser, backend);
        CHECK(small.edited[0].size() == Size{32, 32});
    }
    SUBCASE("missing labels") {
        spec.labels.reset();
        CHECK_THROWS_AS(run_edit(spec, parser, backend), ParserError);
    }
    SUBCASE("label map of the wrong size") {
        save_png(dir / "small.png", LabelMap(10, 10, 1));
        spec.labels = dir / "small.png";
        CHECK_THROWS_AS(run_edit(spec, parser, backend), ParserError);
    }
    SUBCASE("invalid spec") {
        spec.prompt.clear();
        CHECK_THROWS_AS(run_edit(spec, parser, backend), ContractViolation);
    }
}

TEST_CASE("external parser") {
    const auto p = fixture::person(30, 24);
    const auto dir = fixture::temp_dir("parser");
    save_png(dir / "precomputed.png", p.labels);

    ExternalParser parser(parser_command());
    const auto labels = parser.labels_for(p.image, std::nullopt);
    CHECK(labels.size() == p.image.size());
    CHECK(labels.get(15, 12) == 1);
    CHECK(labels.get(0, 0) == 0);
    CHECK(parser.labels_for(p.image, dir / "precomputed.png") == p.labels);

    ExternalParser empty(parser_command("empty"));
    StubBackend backend;
    const auto none = empty.labels_for(p.image, std::nullopt);
    CHECK_THROWS_AS(edit_image(p.image, none, "x", small_masks(2), one_variation(), backend), NoSubjectError);

    ExternalParser failing(parser_command("fail"));
    CHECK_THROWS_WITH_AS(failing.labels_for(p.image, std::nullopt),
                         doctest::Contains("simulated parser failure"), ParserError);
    ExternalParser wrong(parser_command("wrong-size"));
    CHECK_THROWS_AS(wrong.labels_for(p.image, std::nullopt), ParserError);
    CHECK_THROWS_AS(ExternalParser({}), ContractViolation);
}

TEST_CASE("derive_seed") {
    const auto s = derive_seed(0, "img", 0, 0);
    CHECK(s == derive_seed(0, "img", 0, 0));
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {0ULL, 1ULL}) {
        for (const char* id : {"a", "b"}) {
            for (std::size_t prompt = 0; prompt < 3; ++prompt) {
                for (int v = 0; v < 4; ++v) {
                    const auto x = derive_seed(base, id, prompt, v);
                    CHECK(x < (1ULL << 63));
                    seen.insert(x);
                }
            }
        }
    }
    CHECK(seen.size() == 2 * 2 * 3 * 4);
}

TEST_CASE("load_prompts") {
    const auto dir = fixture::temp_dir("prompts");
    {
        std::ofstream out(dir / "p.txt");
        out << "# header\n\n  a red dress  \r\nblue jeans\n   # indented comment\n\tgreen coat\n";
    }
    CHECK(load_prompts(dir / "p.txt") == std::vector<std::string>{"a red dress", "blue jeans", "green coat"});
    {
        std::ofstream out(dir / "empty.txt");
        out << "# nothing\n\n";
    }
    CHECK_THROWS(load_prompts(dir / "empty.txt"));
    CHECK_THROWS(load_prompts(dir / "missing.txt"));
}

TEST_CASE("to_working_resolution") {
    auto p = fixture::person(80, 40);
    to_working_resolution(p.image, p.labels, 20);
    CHECK(p.image.size() == Size{20, 10});
    CHECK(p.labels.size() == Size{20, 10});
    auto q = fixture::person(80, 40);
    const auto before = q.image;
    to_working_resolution(q.image, q.labels, 0);
    CHECK(q.image == before);
}

TEST_CASE("committed fixtures match the generator") {
    const auto p = fixture::person(fixture::kFixtureWidth, fixture::kFixtureHeight);
    const std::filesystem::path dir = DICTI_TEST_FIXTURES_DIR;
    CHECK(load_rgb(dir / "person.png") == p.image);
    CHECK(load_label_map(dir / "person_labels.png") == p.labels);
}
