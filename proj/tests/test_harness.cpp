#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dicti/harness.hpp"
#include "dicti/image_io.hpp"
#include "support/oracles.hpp"

using namespace dicti;
namespace fs = std::filesystem;

namespace {

// Returns the source unchanged, so edited images equal the references.
class IdentityBackend final : public InpaintingBackend {
public:
    [[nodiscard]] std::string name() const override { return "identity"; }
    RgbImage inpaint(const SynthesisRequest& request, std::uint64_t) override { return request.image; }
};

// Fails for any prompt containing "boom".
class FlakyBackend final : public InpaintingBackend {
public:
    [[nodiscard]] std::string name() const override { return "flaky"; }
    RgbImage inpaint(const SynthesisRequest& request, std::uint64_t seed) override {
        if (request.prompt.find("boom") != std::string::npos) throw BackendError("simulated backend failure");
        return stub_fill(request, seed);
    }
};

DatasetManifest synthetic_manifest(std::size_t n) {
    DatasetManifest m;
    m.dataset = "synthetic";
    for (std::size_t i = 0; i < n; ++i) m.entries.push_back({"img" + std::to_string(i), "unused", std::nullopt, {4, 4}});
    return m;
}

// Person images of different proportions on disk with their label maps.
DatasetManifest person_dataset(const std::string& tag, int n) {
    const auto root = fixture::temp_dir(tag);
    for (int i = 0; i < n; ++i) {
        const auto p = fixture::person(40 + 8 * i, 48);
        const std::string stem = "p" + std::to_string(i);
        fs::create_directories(root / "image");
        fs::create_directories(root / "labels");
        save_png(root / "image" / (stem + ".png"), p.image);
        save_png(root / "labels" / (stem + ".png"), p.labels);
    }
    return ingest_viton(root);
}

BatchOptions small_options() {
    BatchOptions o;
    o.masks.d = 2;
    o.masks.e = 1;
    o.masks.f = 1;
    o.synthesis.seed = 5;
    o.synthesis.variations = 1;
    o.workers = 2;
    return o;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("generation planning counts") {
    CHECK(plan_generations(synthetic_manifest(416), 9, 1, 0).size() == 3744);
    CHECK(plan_generations(synthetic_manifest(2), 3, 1, 0).size() == 6);

    AblationGrid grid;
    grid.d_values = {0, 30, 50, 70, 90, 110};
    grid.prompts = {"a", "b", "c", "d"};
    grid.images = synthetic_manifest(416);
    grid.variations = 5;
    const auto cell = plan_ablation_cell(grid);
    CHECK(cell.size() == 8320);
    CHECK(cell.size() > 8000);

    const auto plan = plan_generations(synthetic_manifest(2), 2, 2, 9);
    REQUIRE(plan.size() == 8);
    CHECK(plan[0].image_id == "img0");
    CHECK(plan[3].prompt_id == 1);
    CHECK(plan[3].variation == 1);
    CHECK(plan[5].seed == derive_seed(9, "img1", 0, 1));
    CHECK_THROWS_AS(plan_generations(synthetic_manifest(2), 0, 1, 0), ContractViolation);
    CHECK_THROWS_AS(plan_generations(synthetic_manifest(2), 1, 0, 0), ContractViolation);
}

TEST_CASE("ablation grid validation") {
    AblationGrid grid;
    grid.prompts = {"a"};
    grid.images = synthetic_manifest(1);
    CHECK_THROWS_AS(grid.validate(), ContractViolation);
    grid.d_values = {0, 30, 30};
    CHECK_THROWS_AS(grid.validate(), ContractViolation);
    grid.d_values = {30, 0};
    CHECK_THROWS_AS(grid.validate(), ContractViolation);
    grid.d_values = {-1, 0};
    CHECK_THROWS_AS(grid.validate(), ContractViolation);
    grid.d_values = {0, 30};
    CHECK_NOTHROW(grid.validate());
    grid.prompts.clear();
    CHECK_THROWS_AS(grid.validate(), ContractViolation);
}

TEST_CASE("run_ablation on two images") {
    const auto manifest = person_dataset("ablation", 2);
    AblationGrid grid;
    grid.d_values = {0, 3};
    grid.prompts = {"a striped shirt"};
    grid.images = manifest;
    grid.e = 1;
    grid.f = 1;
    grid.base_seed = 4;

    PrecomputedLabels parser;
    BackendWorker backend(std::make_shared<StubBackend>());
    ColorStatsExtractor extractor;
    auto options = small_options();
    options.output_dir = fixture::temp_dir("ablation-out");
    options.persist_intermediates = true;

    const auto report = run_ablation(grid, parser, backend, extractor, options);
    CHECK(report.rows.size() == 4);
    REQUIRE(report.summaries.size() == 2);
    CHECK(report.failures() == 0);
    CHECK(report.summaries[0].d == 0);
    CHECK(report.summaries[1].d == 3);
    for (const auto& s : report.summaries) {
        CHECK(s.n_images == 2);
        CHECK(s.kid_mean.has_value());
        CHECK_FALSE(s.partial);
    }
    // Rows sorted by (d, image_id); mask area non-decreasing in d per image.
    CHECK(report.rows[0].image_id == "p0");
    CHECK(report.rows[1].image_id == "p1");
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(report.rows[i].d == 0);
        CHECK(report.rows[i + 2].d == 3);
        CHECK(report.rows[i].mask_area_px <= report.rows[i + 2].mask_area_px);
        CHECK(report.rows[i].mask_area_px > 0);
    }
    CHECK(report.summaries[0].mask_area_mean <= report.summaries[1].mask_area_mean);

    const auto per_image = read_text(options.output_dir / "per_image.csv");
    CHECK(per_image.rfind("d,image_id,prompt_id,variation,mask_area_px,clip_s,clip_iqa,status,error\n", 0) == 0);
    CHECK(line_count(per_image) == 5);
    CHECK(line_count(read_text(options.output_dir / "summary.csv")) == 3);
    CHECK(fs::exists(options.output_dir / "artifacts" / "d3" / "p1" / "p0_v0_edited.png"));
    CHECK(fs::exists(options.output_dir / "artifacts" / "d0" / "p0" / "mask_inpaint.png"));

    SUBCASE("reproducible") {
        auto again = options;
        again.output_dir.clear();
        again.workers = 1;
        const auto second = run_ablation(grid, parser, backend, extractor, again);
        REQUIRE(second.rows.size() == report.rows.size());
        for (std::size_t i = 0; i < second.rows.size(); ++i) {
            CHECK(second.rows[i].clip_s == report.rows[i].clip_s);
            CHECK(second.rows[i].mask_area_px == report.rows[i].mask_area_px);
        }
        CHECK(*second.summaries[1].kid_mean == *report.summaries[1].kid_mean);
    }
}

TEST_CASE("run_ablation records failures and continues") {
    const auto manifest = person_dataset("ablation-fail", 3);
    AblationGrid grid;
    grid.d_values = {1, 2};
    grid.prompts = {"fine", "boom"};
    grid.images = manifest;
    grid.e = 1;
    grid.f = 1;
    PrecomputedLabels parser;
    BackendWorker backend(std::make_shared<FlakyBackend>());
    ColorStatsExtractor extractor;
    const auto report = run_ablation(grid, parser, backend, extractor, small_options());
    CHECK(report.rows.size() == 12);
    CHECK(report.failures() == 6);
    for (const auto& r : report.rows) {
        CHECK(r.ok == (r.prompt_id == 0));
        if (!r.ok) CHECK(r.error.find("simulated backend failure") != std::string::npos);
    }
    for (const auto& s : report.summaries) {
        CHECK(s.partial);
        CHECK(s.n_images == 3);
        CHECK(s.n_failed == 3);
    }
}

TEST_CASE("run_eval counting and failures") {
    const auto manifest = person_dataset("eval", 2);
    PrecomputedLabels parser;
    BackendWorker backend(std::make_shared<StubBackend>());
    ColorStatsExtractor extractor;
    auto options = small_options();
    options.output_dir = fixture::temp_dir("eval-out");

    const std::vector<std::string> prompts{"a red dress", "a denim jacket", "a wool coat"};
    const auto result = run_eval(manifest, prompts, parser, backend, extractor, options);
    CHECK(result.planned == 6);
    CHECK(result.report.rows.size() == 6);
    CHECK(result.report.n_images == 6);
    CHECK(result.failures.empty());
    CHECK(line_count(read_text(options.output_dir / "per_image.csv")) == 7);
    CHECK(line_count(read_text(options.output_dir / "failures.csv")) == 1);

    SUBCASE("variations get distinct ids") {
        options.synthesis.variations = 2;
        options.output_dir.clear();
        const auto r = run_eval(manifest, {prompts[0]}, parser, backend, extractor, options);
        REQUIRE(r.report.rows.size() == 4);
        CHECK(r.report.rows[0].image_id == "p0#0");
        CHECK(r.report.rows[1].image_id == "p0#1");
    }
    SUBCASE("missing labels are recorded per cell") {
        DatasetManifest bigger = person_dataset("eval-extra", 3);
        bigger.entries[1].labels.reset();
        options.output_dir.clear();
        const auto r = run_eval(bigger, prompts, parser, backend, extractor, options);
        CHECK(r.planned == 9);
        CHECK(r.report.rows.size() == 6);
        CHECK(r.failures.size() == 3);
        for (const auto& f : r.failures) CHECK(f.image_id == "p1");
    }
    SUBCASE("empty inputs") {
        CHECK_THROWS_AS(run_eval(DatasetManifest{}, prompts, parser, backend, extractor, options),
                        InsufficientSamples);
        CHECK_THROWS_AS(run_eval(manifest, {}, parser, backend, extractor, options), ContractViolation);
    }
}

TEST_CASE("run_eval with generated equal to reference gives zero KID") {
    const auto manifest = person_dataset("eval-identity", 4);
    PrecomputedLabels parser;
    BackendWorker backend(std::make_shared<IdentityBackend>());
    ColorStatsExtractor extractor;
    const auto result = run_eval(manifest, {"anything"}, parser, backend, extractor, small_options());
    CHECK(result.report.kid_mean == 0.0);
    CHECK(result.report.kid_std == 0.0);
    CHECK(result.report.n_images == 4);
}
