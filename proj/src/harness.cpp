#include "dicti/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <thread>
#include <tuple>

#include "dicti/image_io.hpp"

namespace fs = std::filesystem;

namespace dicti {

std::vector<GenerationTask> plan_generations(const DatasetManifest& manifest, std::size_t n_prompts,
                                             int variations, std::uint64_t base_seed) {
    if (n_prompts == 0) throw ContractViolation("plan: prompt list is empty");
    if (variations < 1) throw ContractViolation("plan: variations must be >= 1");
    std::vector<GenerationTask> tasks;
    tasks.reserve(manifest.entries.size() * n_prompts * static_cast<std::size_t>(variations));
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& id = manifest.entries[i].image_id;
        for (std::size_t p = 0; p < n_prompts; ++p) {
            for (int v = 0; v < variations; ++v) {
                tasks.push_back({i, id, p, v, derive_seed(base_seed, id, p, v)});
            }
        }
    }
    return tasks;
}

void AblationGrid::validate() const {
    if (d_values.empty()) throw ContractViolation("d_values: must not be empty");
    for (std::size_t i = 0; i < d_values.size(); ++i) {
        if (d_values[i] < 0) throw ContractViolation("d_values: radii must be >= 0");
        if (i > 0 && d_values[i] <= d_values[i - 1]) {
            throw ContractViolation("d_values: must be strictly increasing");
        }
    }
    if (prompts.empty()) throw ContractViolation("prompts: must not be empty");
    if (variations < 1) throw ContractViolation("variations: must be >= 1");
    if (e < 0 || f < 0) throw ContractViolation("e/f: radii must be >= 0");
}

std::vector<GenerationTask> plan_ablation_cell(const AblationGrid& grid) {
    grid.validate();
    return plan_generations(grid.images, grid.prompts.size(), grid.variations, grid.base_seed);
}

std::size_t AblationReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const AblationRow& r) { return !r.ok; }));
}

namespace {

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    if (workers == 1) {
        body();
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(body);
    for (auto& t : threads) t.join();
}

struct Cell {
    std::size_t prompt_id = 0;
    int variation = 0;
    bool ok = false;
    std::string error;
    std::vector<double> features;
    ImageScore score;
};

struct RadiusOutcome {
    int d = 0;
    std::size_t mask_area = 0;
    std::vector<Cell> cells;  // ordered by (prompt_id, variation)
};

struct EntryOutcome {
    std::optional<std::vector<double>> reference_features;
    std::vector<RadiusOutcome> per_d;
};

// Shared state for one batch run.
struct BatchContext {
    const DatasetManifest& manifest;
    const std::vector<std::string>& prompts;
    const std::vector<Embedding>& prompt_embeddings;
    const PromptScorer& scorer;
    LabelProvider& parser;
    BackendWorker& backend;
    FeatureExtractor& extractor;
    const BatchOptions& options;
    int variations;
    std::uint64_t base_seed;
    bool ablation_layout;
    std::mutex parser_mutex;
    std::mutex extractor_mutex;
};

fs::path artifact_dir(const BatchContext& ctx, int d, const std::string& image_id) {
    fs::path dir = ctx.options.output_dir / "artifacts";
    if (ctx.ablation_layout) dir /= "d" + std::to_string(d);
    return dir / image_id;
}

std::vector<Cell> failed_cells(const BatchContext& ctx, const std::string& error) {
    std::vector<Cell> cells;
    for (std::size_t p = 0; p < ctx.prompts.size(); ++p) {
        for (int v = 0; v < ctx.variations; ++v) {
            Cell c;
            c.prompt_id = p;
            c.variation = v;
            c.error = error;
            cells.push_back(std::move(c));
        }
    }
    return cells;
}

RadiusOutcome process_radius(BatchContext& ctx, const ManifestEntry& entry, const RgbImage& source,
                             const LabelMap& labels, const MaskGenConfig& cfg) {
    RadiusOutcome out;
    out.d = cfg.d;
    MaskPair masks;
    try {
        masks = generate_masks(labels, cfg);
    } catch (const std::exception& e) {
        out.cells = failed_cells(ctx, e.what());
        return out;
    }
    out.mask_area = masks.inpaint.count();
    if (!masks.inpaint.any()) {
        out.cells = failed_cells(ctx, "no subject detected: the inpainting mask is empty");
        return out;
    }
    const bool persist = ctx.options.persist_intermediates && !ctx.options.output_dir.empty();
    const fs::path adir = persist ? artifact_dir(ctx, cfg.d, entry.image_id) : fs::path{};
    if (persist) {
        save_png(adir / "mask_inpaint.png", masks.inpaint);
        save_png(adir / "mask_head.png", masks.head);
    }

    // Submit everything first so the backend queue stays full.
    struct Pending {
        Cell cell;
        std::future<std::vector<RgbImage>> future;
    };
    std::vector<Pending> pending;
    for (std::size_t p = 0; p < ctx.prompts.size(); ++p) {
        for (int v = 0; v < ctx.variations; ++v) {
            SynthesisParams params = ctx.options.synthesis;
            params.seed = derive_seed(ctx.base_seed, entry.image_id, p, v);
            params.variations = 1;
            Pending pd;
            pd.cell.prompt_id = p;
            pd.cell.variation = v;
            pd.future = ctx.backend.submit(
                SynthesisRequest{source, masks.inpaint, augment_prompt(ctx.prompts[p]), params});
            pending.push_back(std::move(pd));
        }
    }

    std::vector<RgbImage> edited;
    std::vector<std::size_t> edited_cell;
    for (std::size_t i = 0; i < pending.size(); ++i) {
        Cell& cell = pending[i].cell;
        try {
            auto garments = pending[i].future.get();
            RgbImage result = stitch(garments.at(0), source, masks.head);
            if (persist) {
                const std::string stem = "p" + std::to_string(cell.prompt_id) + "_v" + std::to_string(cell.variation);
                save_png(adir / (stem + "_garment.png"), garments[0]);
                save_png(adir / (stem + "_edited.png"), result);
            }
            edited.push_back(std::move(result));
            edited_cell.push_back(i);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    }

    if (!edited.empty()) {
        try {
            std::vector<std::vector<double>> features;
            std::vector<Embedding> embeddings;
            {
                std::lock_guard lock(ctx.extractor_mutex);
                features = ctx.extractor.image_features(edited);
                embeddings = ctx.extractor.image_embeddings(edited);
            }
            if (features.size() != edited.size() || embeddings.size() != edited.size()) {
                throw std::runtime_error("extractor returned the wrong number of results");
            }
            for (std::size_t k = 0; k < edited.size(); ++k) {
                Cell& cell = pending[edited_cell[k]].cell;
                cell.score = ctx.scorer.score(embeddings[k], ctx.prompt_embeddings[cell.prompt_id]);
                cell.features = std::move(features[k]);
                cell.ok = true;
            }
        } catch (const std::exception& e) {
            for (std::size_t idx : edited_cell) pending[idx].cell.error = std::string("scoring: ") + e.what();
        }
    }
    for (auto& pd : pending) out.cells.push_back(std::move(pd.cell));
    return out;
}

EntryOutcome process_entry(BatchContext& ctx, std::size_t index, const std::vector<MaskGenConfig>& cfgs) {
    const ManifestEntry& entry = ctx.manifest.entries[index];
    EntryOutcome outcome;
    RgbImage source;
    LabelMap labels;
    try {
        source = load_entry_image(entry);
        {
            std::lock_guard lock(ctx.parser_mutex);
            labels = ctx.parser.labels_for(source, entry.labels);
        }
        apply_manifest_crop(ctx.manifest, source, labels);
        to_working_resolution(source, labels, ctx.options.working_size);
        {
            std::lock_guard lock(ctx.extractor_mutex);
            auto f = ctx.extractor.image_features(std::span<const RgbImage>(&source, 1));
            if (f.size() != 1) throw std::runtime_error("extractor returned no reference features");
            outcome.reference_features = std::move(f[0]);
        }
    } catch (const std::exception& e) {
        for (const auto& cfg : cfgs) outcome.per_d.push_back({cfg.d, 0, failed_cells(ctx, e.what())});
        return outcome;
    }
    for (const auto& cfg : cfgs) outcome.per_d.push_back(process_radius(ctx, entry, source, labels, cfg));
    return outcome;
}

std::vector<EntryOutcome> run_batch(BatchContext& ctx, const std::vector<MaskGenConfig>& cfgs) {
    std::vector<EntryOutcome> outcomes(ctx.manifest.entries.size());
    parallel_for(outcomes.size(), ctx.options.workers,
                 [&](std::size_t i) { outcomes[i] = process_entry(ctx, i, cfgs); });
    return outcomes;
}

std::vector<Embedding> embed_prompts(FeatureExtractor& extractor, const std::vector<std::string>& prompts) {
    auto e = extractor.text_embeddings(prompts);
    if (e.size() != prompts.size()) throw std::runtime_error("extractor returned wrong prompt embedding count");
    return e;
}

std::vector<std::vector<double>> reference_rows(const std::vector<EntryOutcome>& outcomes) {
    std::vector<std::vector<double>> rows;
    for (const auto& o : outcomes) {
        if (o.reference_features) rows.push_back(*o.reference_features);
    }
    return rows;
}

std::string variant_id(const std::string& image_id, int variation, int variations) {
    return variations > 1 ? image_id + "#" + std::to_string(variation) : image_id;
}

}  // namespace

EvalResult run_eval(const DatasetManifest& manifest, const std::vector<std::string>& prompts,
                    LabelProvider& parser, BackendWorker& backend, FeatureExtractor& extractor,
                    const BatchOptions& options) {
    if (manifest.entries.empty()) throw InsufficientSamples("run_eval: manifest is empty");
    if (prompts.empty()) throw ContractViolation("run_eval: prompt list is empty");
    options.masks.validate();
    options.synthesis.validate();
    const int variations = options.synthesis.variations;

    const auto prompt_embeddings = embed_prompts(extractor, prompts);
    const PromptScorer scorer = PromptScorer::create(extractor, options.antonyms);
    BatchContext ctx{manifest, prompts, prompt_embeddings, scorer, parser, backend, extractor, options,
                     variations, options.synthesis.seed, false, {}, {}};
    const auto outcomes = run_batch(ctx, {options.masks});

    EvalResult result;
    result.planned = plan_generations(manifest, prompts.size(), variations, options.synthesis.seed).size();
    std::vector<ImageScore> rows;
    std::vector<std::vector<double>> gen_features;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& id = manifest.entries[i].image_id;
        for (const auto& cell : outcomes[i].per_d.front().cells) {
            if (!cell.ok) {
                result.failures.push_back({-1, id, cell.prompt_id, cell.variation, cell.error});
                continue;
            }
            ImageScore s = cell.score;
            s.image_id = variant_id(id, cell.variation, variations);
            s.prompt_id = std::to_string(cell.prompt_id);
            rows.push_back(std::move(s));
            gen_features.push_back(cell.features);
        }
    }
    const auto ref = reference_rows(outcomes);
    if (rows.size() < 2 || ref.size() < 2) {
        throw InsufficientSamples("run_eval: " + std::to_string(rows.size()) + " generated and " +
                                  std::to_string(ref.size()) +
                                  " reference images scored; KID needs at least 2 of each" +
                                  (result.failures.empty() ? "" : " (first failure: " + result.failures.front().error + ")"));
    }
    result.report = summarize(std::move(rows), FeatureSet::from_rows(gen_features),
                              FeatureSet::from_rows(ref), options.kid);
    if (!options.output_dir.empty()) write_eval_outputs(options.output_dir, result);
    return result;
}

AblationReport run_ablation(const AblationGrid& grid, LabelProvider& parser, BackendWorker& backend,
                            FeatureExtractor& extractor, const BatchOptions& options) {
    grid.validate();
    if (grid.images.entries.empty()) throw InsufficientSamples("run_ablation: no images");
    options.synthesis.validate();

    std::vector<MaskGenConfig> cfgs;
    for (int d : grid.d_values) {
        MaskGenConfig cfg = options.masks;
        cfg.d = d;
        cfg.e = grid.e;
        cfg.f = grid.f;
        cfg.validate();
        cfgs.push_back(cfg);
    }

    const auto prompt_embeddings = embed_prompts(extractor, grid.prompts);
    const PromptScorer scorer = PromptScorer::create(extractor, options.antonyms);
    BatchContext ctx{grid.images, grid.prompts, prompt_embeddings, scorer, parser, backend, extractor,
                     options, grid.variations, grid.base_seed, true, {}, {}};
    const auto outcomes = run_batch(ctx, cfgs);
    const auto ref = reference_rows(outcomes);

    AblationReport report;
    report.kid = options.kid;
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
        AblationSummary summary;
        summary.d = cfgs[k].d;
        std::vector<std::vector<double>> gen_features;
        std::size_t area_sum = 0;
        std::size_t area_n = 0;
        summary.mask_area_min = std::numeric_limits<std::size_t>::max();
        double cs = 0;
        double iqa = 0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& per = outcomes[i].per_d[k];
            const auto& id = grid.images.entries[i].image_id;
            if (outcomes[i].reference_features) {
                area_sum += per.mask_area;
                ++area_n;
                summary.mask_area_min = std::min(summary.mask_area_min, per.mask_area);
                summary.mask_area_max = std::max(summary.mask_area_max, per.mask_area);
            }
            for (const auto& cell : per.cells) {
                AblationRow row;
                row.d = per.d;
                row.image_id = id;
                row.prompt_id = cell.prompt_id;
                row.variation = cell.variation;
                row.mask_area_px = per.mask_area;
                row.ok = cell.ok;
                row.error = cell.error;
                if (cell.ok) {
                    row.clip_s = cell.score.clip_s;
                    row.clip_iqa = cell.score.clip_iqa;
                    cs += row.clip_s;
                    iqa += row.clip_iqa;
                    ++summary.n_images;
                    gen_features.push_back(cell.features);
                } else {
                    ++summary.n_failed;
                }
                report.rows.push_back(std::move(row));
            }
        }
        if (area_n == 0) summary.mask_area_min = 0;
        summary.mask_area_mean = area_n > 0 ? static_cast<double>(area_sum) / static_cast<double>(area_n) : 0.0;
        if (summary.n_images > 0) {
            summary.clip_s_mean = cs / static_cast<double>(summary.n_images);
            summary.clip_iqa_mean = iqa / static_cast<double>(summary.n_images);
        }
        if (gen_features.size() >= 2 && ref.size() >= 2) {
            const KidResult kr = kid(FeatureSet::from_rows(gen_features), FeatureSet::from_rows(ref), options.kid);
            summary.kid_mean = kr.mean;
            summary.kid_std = kr.std;
            summary.kid_subset_size = kr.subset_size;
        }
        summary.partial = summary.n_failed > 0 || !summary.kid_mean;
        report.summaries.push_back(summary);
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const AblationRow& a, const AblationRow& b) {
        return std::tie(a.d, a.image_id, a.prompt_id, a.variation) <
               std::tie(b.d, b.image_id, b.prompt_id, b.variation);
    });
    if (!options.output_dir.empty()) write_ablation_report(options.output_dir, report);
    return report;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_failures(const fs::path& path, const std::vector<FailureRow>& failures) {
    std::ofstream out(path);
    out << "d,image_id,prompt_id,variation,error\n";
    for (const auto& f : failures) {
        out << f.d << ',' << csv_escape(f.image_id) << ',' << f.prompt_id << ',' << f.variation << ','
            << csv_escape(f.error) << '\n';
    }
}

}  // namespace

void write_eval_outputs(const fs::path& dir, const EvalResult& result) {
    write_report(dir, result.report);
    write_failures(dir / "failures.csv", result.failures);
}

void write_ablation_report(const fs::path& dir, const AblationReport& report) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "per_image.csv");
        out << std::setprecision(10);
        out << "d,image_id,prompt_id,variation,mask_area_px,clip_s,clip_iqa,status,error\n";
        for (const auto& r : report.rows) {
            out << r.d << ',' << csv_escape(r.image_id) << ',' << r.prompt_id << ',' << r.variation << ','
                << r.mask_area_px << ',';
            if (r.ok) {
                out << r.clip_s << ',' << r.clip_iqa << ",ok,\n";
            } else {
                out << ",,failed," << csv_escape(r.error) << '\n';
            }
        }
    }
    std::ofstream out(dir / "summary.csv");
    out << std::setprecision(10);
    out << "d,kid_mean,kid_std,clip_s_mean,clip_iqa_mean,n_images,n_failed,mask_area_mean_px,"
           "mask_area_min_px,mask_area_max_px,subset_size,n_subsets,rng_seed,partial\n";
    for (const auto& s : report.summaries) {
        out << s.d << ',';
        if (s.kid_mean) {
            out << *s.kid_mean << ',' << *s.kid_std << ',';
        } else {
            out << ",,";
        }
        out << s.clip_s_mean << ',' << s.clip_iqa_mean << ',' << s.n_images << ',' << s.n_failed << ','
            << s.mask_area_mean << ',' << s.mask_area_min << ',' << s.mask_area_max << ','
            << s.kid_subset_size << ',' << report.kid.n_subsets << ','
            << report.kid.rng_seed << ',' << (s.partial ? "true" : "false") << '\n';
    }
}

}  // namespace dicti
