#include "dicti/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dicti/hashing.hpp"
#include "dicti/image_io.hpp"
#include "subprocess.hpp"

namespace dicti {

FeatureSet::FeatureSet(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw ContractViolation("FeatureSet: dim must be >= 1");
    if (values_.size() % dim_ != 0) {
        throw ContractViolation("FeatureSet: value count is not a multiple of dim");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw ContractViolation("FeatureSet: non-finite entry");
    }
}

FeatureSet FeatureSet::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InsufficientSamples("FeatureSet: no rows");
    const std::size_t dim = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * dim);
    for (const auto& r : rows) {
        if (r.size() != dim) throw ContractViolation("FeatureSet: ragged rows");
        values.insert(values.end(), r.begin(), r.end());
    }
    return FeatureSet(dim, std::move(values));
}

FeatureSet FeatureSet::select(std::span<const std::size_t> indices) const {
    std::vector<double> values;
    values.reserve(indices.size() * dim_);
    for (std::size_t i : indices) {
        if (i >= size()) throw ContractViolation("FeatureSet::select: index out of range");
        const auto r = row(i);
        values.insert(values.end(), r.begin(), r.end());
    }
    return FeatureSet(dim_, std::move(values));
}

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
    double sq = 0;
    for (double v : values_) {
        if (!std::isfinite(v)) throw ContractViolation("Embedding: non-finite entry");
        sq += v * v;
    }
    if (values_.empty() || std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
        throw ContractViolation("Embedding: vector is not unit length");
    }
}

Embedding Embedding::normalized(std::vector<double> values) {
    double sq = 0;
    for (double v : values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 0) || !std::isfinite(norm)) {
        throw ContractViolation("Embedding: cannot normalize a zero or non-finite vector");
    }
    for (double& v : values) v /= norm;
    return Embedding(std::move(values));
}

double poly_kernel(std::span<const double> x, std::span<const double> y, std::size_t dim) {
    if (x.size() != dim || y.size() != dim || dim == 0) {
        throw ContractViolation("poly_kernel: vector lengths must equal dim");
    }
    double dot = 0;
    for (std::size_t k = 0; k < dim; ++k) dot += x[k] * y[k];
    const double base = dot / static_cast<double>(dim) + 1.0;
    return base * base * base;
}

namespace {

// Dense n x m kernel matrix, row-major.
struct Gram {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> k;

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return k[i * cols + j]; }
};

Gram gram(const FeatureSet& a, const FeatureSet& b) {
    Gram g{a.size(), b.size(), std::vector<double>(a.size() * b.size())};
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            g.k[i * g.cols + j] = poly_kernel(a.row(i), b.row(j), a.dim());
        }
    }
    return g;
}

// Sum over ordered pairs i != j of K(idx_a[i], idx_b[j]). Identity index
// vectors reproduce the plain full-matrix sum in the same order.
double off_diagonal_sum(const Gram& g, std::span<const std::size_t> ia, std::span<const std::size_t> ib) {
    double s = 0;
    for (std::size_t i = 0; i < ia.size(); ++i) {
        for (std::size_t j = 0; j < ib.size(); ++j) {
            if (i != j) s += g.at(ia[i], ib[j]);
        }
    }
    return s;
}

double mmd2_from_grams(const Gram& kxx, const Gram& kyy, const Gram& kxy,
                       std::span<const std::size_t> ix, std::span<const std::size_t> iy) {
    const double n = static_cast<double>(ix.size());
    const double sxx = off_diagonal_sum(kxx, ix, ix);
    const double syy = off_diagonal_sum(kyy, iy, iy);
    // sum_{i!=j} k(x_i, y_j) == sum_{i!=j} k(x_j, y_i), so the cross terms fold.
    const double sxy = off_diagonal_sum(kxy, ix, iy);
    return (sxx + syy - 2.0 * sxy) / (n * (n - 1.0));
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    // Rejection sampling keeps the draw identical on every standard library.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

// k distinct indices from [0, n), returned in ascending order.
std::vector<std::size_t> sample_without_replacement(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool = iota_indices(n);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

void require_mmd_inputs(const FeatureSet& x, const FeatureSet& y) {
    if (x.size() < 2 || y.size() < 2) {
        throw InsufficientSamples("mmd2_unbiased: need at least 2 samples per set, got " +
                                  std::to_string(x.size()) + " and " + std::to_string(y.size()));
    }
    if (x.dim() != y.dim()) {
        throw ContractViolation("mmd2_unbiased: feature dimensions differ (" +
                                std::to_string(x.dim()) + " vs " + std::to_string(y.dim()) + ")");
    }
}

constexpr std::size_t kFullGramLimit = 4096;

}  // namespace

double mmd2_unbiased(const FeatureSet& x, const FeatureSet& y) {
    require_mmd_inputs(x, y);
    if (x.size() != y.size()) {
        throw ContractViolation("mmd2_unbiased: sample counts differ (" + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()) + ")");
    }
    const auto idx = iota_indices(x.size());
    return mmd2_from_grams(gram(x, x), gram(y, y), gram(x, y), idx, idx);
}

KidResult kid(const FeatureSet& x, const FeatureSet& y, std::size_t subset_size,
              std::size_t n_subsets, std::uint64_t rng_seed) {
    require_mmd_inputs(x, y);
    if (n_subsets < 1) throw ContractViolation("kid: n_subsets must be >= 1");
    if (subset_size < 2) throw InsufficientSamples("kid: subset_size must be >= 2");
    if (subset_size > std::min(x.size(), y.size())) {
        throw InsufficientSamples("kid: subset_size " + std::to_string(subset_size) +
                                  " exceeds available samples (" + std::to_string(x.size()) +
                                  ", " + std::to_string(y.size()) + ")");
    }
    const bool paired = x.size() == y.size();
    std::mt19937_64 rng(rng_seed);

    const bool full = std::max(x.size(), y.size()) <= kFullGramLimit;
    Gram kxx;
    Gram kyy;
    Gram kxy;
    if (full) {
        kxx = gram(x, x);
        kyy = gram(y, y);
        kxy = gram(x, y);
    }

    std::vector<double> estimates;
    estimates.reserve(n_subsets);
    for (std::size_t s = 0; s < n_subsets; ++s) {
        const auto ix = sample_without_replacement(rng, x.size(), subset_size);
        const auto iy = paired ? ix : sample_without_replacement(rng, y.size(), subset_size);
        if (full) {
            estimates.push_back(mmd2_from_grams(kxx, kyy, kxy, ix, iy));
        } else {
            const FeatureSet xs = x.select(ix);
            const FeatureSet ys = y.select(iy);
            const auto id = iota_indices(subset_size);
            estimates.push_back(mmd2_from_grams(gram(xs, xs), gram(ys, ys), gram(xs, ys), id, id));
        }
    }

    KidResult r;
    r.subset_size = subset_size;
    r.n_subsets = n_subsets;
    double sum = 0;
    for (double e : estimates) sum += e;
    r.mean = sum / static_cast<double>(estimates.size());
    double var = 0;
    for (double e : estimates) var += (e - r.mean) * (e - r.mean);
    r.std = std::sqrt(var / static_cast<double>(estimates.size()));
    return r;
}

KidResult kid(const FeatureSet& x, const FeatureSet& y, const KidParams& params) {
    const std::size_t available = std::min(x.size(), y.size());
    return kid(x, y, std::min(params.subset_size, available), params.n_subsets, params.rng_seed);
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        throw ContractViolation("embedding dimensions differ (" + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()) + ")");
    }
    double dot = 0;
    double na = 0;
    double nb = 0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        dot += av[i] * bv[i];
        na += av[i] * av[i];
        nb += bv[i] * bv[i];
    }
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double clip_score(const Embedding& image, const Embedding& text) {
    return 100.0 * std::max(cosine(image, text), 0.0);
}

double clip_iqa(const Embedding& image, const Embedding& positive, const Embedding& negative) {
    const double s_pos = cosine(image, positive);
    const double s_neg = cosine(image, negative);
    // Logistic form of e^a / (e^a + e^b); bounded inputs keep it in (0, 1).
    return 1.0 / (1.0 + std::exp(s_neg - s_pos));
}

// ---------------------------------------------------------------------------
// Extractors

namespace {

constexpr int kGrid = 4;

std::vector<double> color_stats(const RgbImage& image) {
    // Per-cell RGB means and standard deviations over a kGrid x kGrid layout.
    std::vector<double> out;
    out.reserve(kGrid * kGrid * 6);
    for (int gy = 0; gy < kGrid; ++gy) {
        const int y0 = gy * image.height() / kGrid;
        const int y1 = std::max(y0 + 1, (gy + 1) * image.height() / kGrid);
        for (int gx = 0; gx < kGrid; ++gx) {
            const int x0 = gx * image.width() / kGrid;
            const int x1 = std::max(x0 + 1, (gx + 1) * image.width() / kGrid);
            double sum[3] = {0, 0, 0};
            double sq[3] = {0, 0, 0};
            double n = 0;
            for (int y = y0; y < std::min(y1, image.height()); ++y) {
                for (int x = x0; x < std::min(x1, image.width()); ++x) {
                    const std::uint8_t* p = image.at(x, y);
                    for (int c = 0; c < 3; ++c) {
                        const double v = p[c] / 255.0;
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                    n += 1;
                }
            }
            for (int c = 0; c < 3; ++c) {
                const double mean = n > 0 ? sum[c] / n : 0;
                out.push_back(mean);
                out.push_back(n > 0 ? std::sqrt(std::max(sq[c] / n - mean * mean, 0.0)) : 0);
            }
        }
    }
    return out;
}

// Deterministic pseudo-random value in [-1, 1) derived from (row, col).
double projection_entry(std::uint64_t row, std::uint64_t col) {
    const std::uint64_t h = hash_combine(0x5eedULL + row, col);
    return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace

ColorStatsExtractor::ColorStatsExtractor(std::size_t embedding_dim) : embedding_dim_(embedding_dim) {
    if (embedding_dim_ == 0) throw ContractViolation("ColorStatsExtractor: embedding_dim must be >= 1");
}

std::vector<std::vector<double>> ColorStatsExtractor::image_features(std::span<const RgbImage> images) {
    std::vector<std::vector<double>> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(color_stats(img));
    return out;
}

std::vector<Embedding> ColorStatsExtractor::image_embeddings(std::span<const RgbImage> images) {
    std::vector<Embedding> out;
    out.reserve(images.size());
    for (const auto& img : images) {
        const auto stats = color_stats(img);
        std::vector<double> e(embedding_dim_, 0.0);
        for (std::size_t r = 0; r < embedding_dim_; ++r) {
            for (std::size_t c = 0; c < stats.size(); ++c) {
                e[r] += projection_entry(r, c) * (stats[c] - 0.5);
            }
        }
        e[0] += 1e-9;  // a flat mid-gray image would otherwise project to zero
        out.push_back(Embedding::normalized(std::move(e)));
    }
    return out;
}

std::vector<Embedding> ColorStatsExtractor::text_embeddings(std::span<const std::string> texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::vector<double> e(embedding_dim_, 0.0);
        for (const auto& tok : tokenize(t)) {
            const std::uint64_t h = fnv1a64(tok);
            for (std::size_t r = 0; r < embedding_dim_; ++r) e[r] += projection_entry(r, h);
        }
        e[0] += 1e-9;
        out.push_back(Embedding::normalized(std::move(e)));
    }
    return out;
}

struct ExternalExtractor::Response {
    std::vector<std::vector<double>> features;
    std::vector<std::vector<double>> image_embeddings;
    std::vector<std::vector<double>> text_embeddings;
};

ExternalExtractor::ExternalExtractor(std::vector<std::string> command, std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {
    if (command_.empty()) throw ContractViolation("ExternalExtractor: empty command");
}

ExternalExtractor::Response ExternalExtractor::call(std::span<const RgbImage> images,
                                                    std::span<const std::string> texts,
                                                    const std::string& mode) {
    const detail::WorkDir work(work_dir_, "dicti-extract");
    const auto& dir = work.path();

    nlohmann::json req;
    req["mode"] = mode;
    req["images"] = nlohmann::json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto p = dir / ("img_" + std::to_string(i) + ".png");
        save_png(p, images[i]);
        req["images"].push_back(p.string());
    }
    req["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    req["output"] = (dir / "response.json").string();
    {
        std::ofstream out(dir / "request.json");
        out << req.dump(2);
    }
    if (const int rc = detail::run_logged(command_, {"--request", (dir / "request.json").string()}, dir / "log.txt");
        rc != 0) {
        throw std::runtime_error("extractor process exited with status " + std::to_string(rc) + ": " +
                                 detail::log_tail(dir / "log.txt"));
    }
    std::ifstream in(dir / "response.json");
    if (!in) throw std::runtime_error("extractor produced no response.json in " + dir.string());
    nlohmann::json j;
    in >> j;
    Response r;
    r.features = j.value("features", std::vector<std::vector<double>>{});
    r.image_embeddings = j.value("image_embeddings", std::vector<std::vector<double>>{});
    r.text_embeddings = j.value("text_embeddings", std::vector<std::vector<double>>{});
    return r;
}

std::vector<std::vector<double>> ExternalExtractor::image_features(std::span<const RgbImage> images) {
    auto r = call(images, {}, "features");
    if (r.features.size() != images.size()) throw std::runtime_error("extractor: feature count mismatch");
    return std::move(r.features);
}

std::vector<Embedding> ExternalExtractor::image_embeddings(std::span<const RgbImage> images) {
    auto r = call(images, {}, "image_embeddings");
    if (r.image_embeddings.size() != images.size()) {
        throw std::runtime_error("extractor: image embedding count mismatch");
    }
    std::vector<Embedding> out;
    for (auto& v : r.image_embeddings) out.push_back(Embedding::normalized(std::move(v)));
    return out;
}

std::vector<Embedding> ExternalExtractor::text_embeddings(std::span<const std::string> texts) {
    auto r = call({}, texts, "text_embeddings");
    if (r.text_embeddings.size() != texts.size()) {
        throw std::runtime_error("extractor: text embedding count mismatch");
    }
    std::vector<Embedding> out;
    for (auto& v : r.text_embeddings) out.push_back(Embedding::normalized(std::move(v)));
    return out;
}

std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec) {
    if (spec == "color-stats") return std::make_shared<ColorStatsExtractor>();
    constexpr std::string_view kExternal = "external:";
    if (spec.rfind(kExternal, 0) == 0) {
        std::istringstream parts(spec.substr(kExternal.size()));
        std::vector<std::string> command;
        for (std::string p; parts >> p;) command.push_back(p);
        return std::make_shared<ExternalExtractor>(std::move(command));
    }
    throw ContractViolation("unknown extractor '" + spec + "' (expected color-stats or external:<cmd>)");
}

// ---------------------------------------------------------------------------
// Reports

PromptScorer PromptScorer::create(FeatureExtractor& extractor, const AntonymPair& antonyms) {
    const std::vector<std::string> texts{antonyms.positive, antonyms.negative};
    auto e = extractor.text_embeddings(texts);
    if (e.size() != 2) throw std::runtime_error("extractor returned wrong antonym embedding count");
    return PromptScorer{std::move(e[0]), std::move(e[1])};
}

ImageScore PromptScorer::score(const Embedding& image, const Embedding& prompt) const {
    ImageScore s;
    s.clip_s = clip_score(image, prompt);
    s.clip_iqa = clip_iqa(image, positive, negative);
    return s;
}

MetricsReport summarize(std::vector<ImageScore> rows, const FeatureSet& generated_features,
                        const FeatureSet& reference_features, const KidParams& kid_params) {
    if (rows.empty()) throw InsufficientSamples("summarize: no scored images");
    MetricsReport report;
    const KidResult k = kid(generated_features, reference_features, kid_params);
    report.kid_mean = k.mean;
    report.kid_std = k.std;
    report.subset_size = k.subset_size;
    report.n_subsets = k.n_subsets;
    report.rng_seed = kid_params.rng_seed;
    double cs = 0;
    double iqa = 0;
    for (const auto& r : rows) {
        cs += r.clip_s;
        iqa += r.clip_iqa;
    }
    report.n_images = rows.size();
    report.clip_s_mean = cs / static_cast<double>(rows.size());
    report.clip_iqa_mean = iqa / static_cast<double>(rows.size());
    report.rows = std::move(rows);
    return report;
}

MetricsReport evaluate_set(std::span<const RgbImage> generated, std::span<const RgbImage> reference,
                           std::span<const std::string> prompts, FeatureExtractor& extractor,
                           const AntonymPair& antonyms, const KidParams& kid_params,
                           std::span<const std::string> image_ids,
                           std::span<const std::string> prompt_ids) {
    if (generated.empty()) throw InsufficientSamples("evaluate_set: no generated images");
    if (reference.empty()) throw InsufficientSamples("evaluate_set: no reference images");
    if (prompts.size() != generated.size()) {
        throw ContractViolation("evaluate_set: prompts must align 1:1 with generated images");
    }
    if (!image_ids.empty() && image_ids.size() != generated.size()) {
        throw ContractViolation("evaluate_set: image_ids must align with generated images");
    }
    if (!prompt_ids.empty() && prompt_ids.size() != generated.size()) {
        throw ContractViolation("evaluate_set: prompt_ids must align with generated images");
    }
    const FeatureSet gen_features = FeatureSet::from_rows(extractor.image_features(generated));
    const FeatureSet ref_features = FeatureSet::from_rows(extractor.image_features(reference));
    const auto image_emb = extractor.image_embeddings(generated);
    const auto prompt_emb = extractor.text_embeddings(prompts);
    if (image_emb.size() != generated.size() || prompt_emb.size() != prompts.size()) {
        throw std::runtime_error("extractor returned wrong embedding count");
    }
    const PromptScorer scorer = PromptScorer::create(extractor, antonyms);

    std::vector<ImageScore> rows;
    rows.reserve(generated.size());
    for (std::size_t i = 0; i < generated.size(); ++i) {
        ImageScore s = scorer.score(image_emb[i], prompt_emb[i]);
        s.image_id = image_ids.empty() ? std::to_string(i) : image_ids[i];
        s.prompt_id = prompt_ids.empty() ? std::to_string(i) : prompt_ids[i];
        rows.push_back(std::move(s));
    }
    return summarize(std::move(rows), gen_features, ref_features, kid_params);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void write_report(const std::filesystem::path& dir, const MetricsReport& report) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "per_image.csv");
        out << std::setprecision(10);
        out << "image_id,prompt_id,clip_s,clip_iqa\n";
        for (const auto& r : report.rows) {
            out << csv_field(r.image_id) << ',' << csv_field(r.prompt_id) << ',' << r.clip_s << ','
                << r.clip_iqa << '\n';
        }
    }
    std::ofstream out(dir / "summary.csv");
    out << std::setprecision(10);
    out << "kid_mean,kid_std,clip_s_mean,clip_iqa_mean,n_images,subset_size,n_subsets,rng_seed\n";
    out << report.kid_mean << ',' << report.kid_std << ',' << report.clip_s_mean << ','
        << report.clip_iqa_mean << ',' << report.n_images << ',' << report.subset_size << ','
        << report.n_subsets << ',' << report.rng_seed << '\n';
}

}  // namespace dicti
