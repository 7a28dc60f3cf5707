#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dicti/dataset.hpp"
#include "dicti/maskgen.hpp"
#include "dicti/metrics.hpp"
#include "dicti/pipeline.hpp"
#include "dicti/synthesis.hpp"

namespace dicti {

/// One planned generation: an (image, prompt, variation) cell.
struct GenerationTask {
    std::size_t entry_index = 0;
    std::string image_id;
    std::size_t prompt_id = 0;
    int variation = 0;
    std::uint64_t seed = 0;
};

/// Cartesian image x prompt x variation plan, ordered by (image_id, prompt_id, variation).
std::vector<GenerationTask> plan_generations(const DatasetManifest& manifest, std::size_t n_prompts,
                                             int variations, std::uint64_t base_seed);

struct BatchOptions {
    MaskGenConfig masks;
    SynthesisParams synthesis;  // seed is the base seed; variations per (image, prompt)
    KidParams kid;
    AntonymPair antonyms;
    std::filesystem::path output_dir;  // empty: nothing written
    bool persist_intermediates = false;
    int working_size = 0;
    unsigned workers = 2;  // preparation/scoring threads; backend calls stay serialized
};

struct FailureRow {
    int d = -1;  // -1 outside ablation
    std::string image_id;
    std::size_t prompt_id = 0;
    int variation = 0;
    std::string error;
};

struct EvalResult {
    MetricsReport report;
    std::vector<FailureRow> failures;
    std::size_t planned = 0;
};

/// Generates every (image, prompt, variation), then scores the set against
/// the source images. Failed cells are recorded and skipped.
EvalResult run_eval(const DatasetManifest& manifest, const std::vector<std::string>& prompts,
                    LabelProvider& parser, BackendWorker& backend, FeatureExtractor& extractor,
                    const BatchOptions& options);

struct AblationGrid {
    std::vector<int> d_values;
    std::vector<std::string> prompts;
    DatasetManifest images;
    int variations = 1;
    int e = 10;
    int f = 5;
    std::uint64_t base_seed = 0;

    /// Non-empty strictly increasing non-negative d_values; prompts non-empty.
    void validate() const;
};

/// Per-d plan; identical for every d so seeds are shared across the sweep.
std::vector<GenerationTask> plan_ablation_cell(const AblationGrid& grid);

struct AblationRow {
    int d = 0;
    std::string image_id;
    std::size_t prompt_id = 0;
    int variation = 0;
    std::size_t mask_area_px = 0;
    double clip_s = 0;
    double clip_iqa = 0;
    bool ok = false;
    std::string error;
};

struct AblationSummary {
    int d = 0;
    std::optional<double> kid_mean;  // unset when too few images succeeded
    std::optional<double> kid_std;
    double clip_s_mean = 0;
    double clip_iqa_mean = 0;
    std::size_t n_images = 0;
    std::size_t n_failed = 0;
    double mask_area_mean = 0;
    std::size_t mask_area_min = 0;
    std::size_t mask_area_max = 0;
    std::size_t kid_subset_size = 0;
    bool partial = false;
};

struct AblationReport {
    std::vector<AblationSummary> summaries;  // one per d, ascending
    std::vector<AblationRow> rows;           // sorted by (d, image_id, prompt_id, variation)
    KidParams kid;

    [[nodiscard]] std::size_t failures() const;
};

/// Sweeps the dilation radius. `options.masks` supplies label groups; its
/// d/e/f are replaced by the grid's values.
AblationReport run_ablation(const AblationGrid& grid, LabelProvider& parser, BackendWorker& backend,
                            FeatureExtractor& extractor, const BatchOptions& options);

void write_eval_outputs(const std::filesystem::path& dir, const EvalResult& result);
void write_ablation_report(const std::filesystem::path& dir, const AblationReport& report);

}  // namespace dicti
