#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dicti/image.hpp"

namespace dicti {

class InsufficientSamples : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// n feature vectors of equal dimension, all entries finite.
class FeatureSet {
public:
    FeatureSet() = default;
    FeatureSet(std::size_t dim, std::vector<double> values);
    static FeatureSet from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    /// Rows at the given indices, in order.
    [[nodiscard]] FeatureSet select(std::span<const std::size_t> indices) const;

private:
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

/// Unit-L2 vector in a joint image/text embedding space.
class Embedding {
public:
    /// Requires ||values|| = 1 within 1e-6.
    explicit Embedding(std::vector<double> values);
    /// Scales a non-zero vector to unit length.
    static Embedding normalized(std::vector<double> values);

    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::size_t dim() const { return values_.size(); }

private:
    std::vector<double> values_;
};

/// Cubic polynomial kernel (x.y / dim + 1)^3.
double poly_kernel(std::span<const double> x, std::span<const double> y, std::size_t dim);

/// Unbiased squared MMD with the cubic polynomial kernel. Requires equal
/// sample counts n >= 2. Returns exactly 0 for identical sample sets.
double mmd2_unbiased(const FeatureSet& x, const FeatureSet& y);

struct KidParams {
    std::size_t subset_size = 1000;  // clipped to the available sample count
    std::size_t n_subsets = 100;
    std::uint64_t rng_seed = 0;
};

struct KidResult {
    double mean = 0;
    double std = 0;  // population standard deviation over subsets
    std::size_t subset_size = 0;
    std::size_t n_subsets = 0;
};

/// Averages mmd2_unbiased over seeded random subsets drawn without
/// replacement. When both sets hold the same number of samples the same
/// index subset is applied to both.
KidResult kid(const FeatureSet& x, const FeatureSet& y, std::size_t subset_size,
              std::size_t n_subsets, std::uint64_t rng_seed);
/// Default subsetting: subset_size = min(params.subset_size, x.n, y.n).
KidResult kid(const FeatureSet& x, const FeatureSet& y, const KidParams& params);

double cosine(const Embedding& a, const Embedding& b);

/// 100 * max(cos, 0).
double clip_score(const Embedding& image, const Embedding& text);

/// Softmax of the cosine similarities to a positive/negative description pair.
double clip_iqa(const Embedding& image, const Embedding& positive, const Embedding& negative);

struct AntonymPair {
    std::string positive = "Good photo.";
    std::string negative = "Bad photo.";
};

/// Maps images to KID features and images/texts to unit embeddings.
/// Implementations must be deterministic with a fixed output dimension.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    virtual std::vector<std::vector<double>> image_features(std::span<const RgbImage> images) = 0;
    virtual std::vector<Embedding> image_embeddings(std::span<const RgbImage> images) = 0;
    virtual std::vector<Embedding> text_embeddings(std::span<const std::string> texts) = 0;
};

/// Cheap deterministic extractor for desk-scale runs and tests. Image
/// features are spatial color statistics; embeddings are fixed random
/// projections of those statistics (images) or of hashed tokens (text).
/// Scores are reproducible but carry no semantic meaning.
class ColorStatsExtractor final : public FeatureExtractor {
public:
    explicit ColorStatsExtractor(std::size_t embedding_dim = 64);
    [[nodiscard]] std::string name() const override { return "color-stats"; }
    std::vector<std::vector<double>> image_features(std::span<const RgbImage> images) override;
    std::vector<Embedding> image_embeddings(std::span<const RgbImage> images) override;
    std::vector<Embedding> text_embeddings(std::span<const std::string> texts) override;

private:
    std::size_t embedding_dim_;
};

/// Delegates to an external process (e.g. Inception + CLIP in Python). The
/// process receives a JSON request listing image paths and texts and writes
/// a JSON response with "features", "image_embeddings", "text_embeddings".
class ExternalExtractor final : public FeatureExtractor {
public:
    ExternalExtractor(std::vector<std::string> command, std::filesystem::path work_dir = {});
    [[nodiscard]] std::string name() const override { return "external"; }
    std::vector<std::vector<double>> image_features(std::span<const RgbImage> images) override;
    std::vector<Embedding> image_embeddings(std::span<const RgbImage> images) override;
    std::vector<Embedding> text_embeddings(std::span<const std::string> texts) override;

private:
    struct Response;
    Response call(std::span<const RgbImage> images, std::span<const std::string> texts,
                  const std::string& mode);

    std::vector<std::string> command_;
    std::filesystem::path work_dir_;
};

/// "color-stats" or "external:<command...>" (space-separated).
std::shared_ptr<FeatureExtractor> make_extractor(const std::string& spec);

struct ImageScore {
    std::string image_id;
    std::string prompt_id;
    double clip_s = 0;
    double clip_iqa = 0;
};

struct MetricsReport {
    double kid_mean = 0;
    double kid_std = 0;
    double clip_s_mean = 0;
    double clip_iqa_mean = 0;
    std::size_t n_images = 0;
    std::size_t subset_size = 0;
    std::size_t n_subsets = 0;
    std::uint64_t rng_seed = 0;
    std::vector<ImageScore> rows;
};

/// Scores one image against its prompt and the antonym pair.
struct PromptScorer {
    Embedding positive;
    Embedding negative;

    static PromptScorer create(FeatureExtractor& extractor, const AntonymPair& antonyms);
    [[nodiscard]] ImageScore score(const Embedding& image, const Embedding& prompt) const;
};

/// KID over extractor features of (generated, reference); CLIP-S and CLIP-IQA
/// averaged over generated images. `prompts` aligns 1:1 with `generated`.
/// `image_ids`/`prompt_ids` label report rows (indices when empty).
MetricsReport evaluate_set(std::span<const RgbImage> generated, std::span<const RgbImage> reference,
                           std::span<const std::string> prompts, FeatureExtractor& extractor,
                           const AntonymPair& antonyms = {}, const KidParams& kid_params = {},
                           std::span<const std::string> image_ids = {},
                           std::span<const std::string> prompt_ids = {});

/// Aggregates already-scored rows with KID over precomputed features.
MetricsReport summarize(std::vector<ImageScore> rows, const FeatureSet& generated_features,
                        const FeatureSet& reference_features, const KidParams& kid_params);

/// Writes `<dir>/per_image.csv` and `<dir>/summary.csv`.
void write_report(const std::filesystem::path& dir, const MetricsReport& report);

}  // namespace dicti
