#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dicti/image.hpp"
#include "dicti/maskgen.hpp"
#include "dicti/synthesis.hpp"

namespace dicti {

/// No person found: the label map yields an empty inpainting region.
class NoSubjectError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The label-map provider failed (missing file, parser crash, bad output).
class ParserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Head region of the source composited over the generated image; no blending.
RgbImage stitch(const RgbImage& generated, const RgbImage& source, const BinaryMask& head);

/// Supplies body-part label maps for images.
class LabelProvider {
public:
    virtual ~LabelProvider() = default;
    /// `precomputed` is the dataset's label-map path for this image, if any.
    virtual LabelMap labels_for(const RgbImage& image,
                                const std::optional<std::filesystem::path>& precomputed) = 0;
};

/// Reads precomputed label-map PNGs; fails when none is available.
class PrecomputedLabels final : public LabelProvider {
public:
    LabelMap labels_for(const RgbImage& image,
                        const std::optional<std::filesystem::path>& precomputed) override;
};

/// Uses precomputed maps when present, otherwise runs an external parser as
/// `<command...> <image.png> <labels.png>`.
class ExternalParser final : public LabelProvider {
public:
    explicit ExternalParser(std::vector<std::string> command);
    LabelMap labels_for(const RgbImage& image,
                        const std::optional<std::filesystem::path>& precomputed) override;

private:
    std::vector<std::string> command_;
};

struct EditJobSpec {
    std::filesystem::path image;
    std::optional<std::filesystem::path> labels;
    std::string prompt;
    MaskGenConfig masks;
    SynthesisParams synthesis;
    std::string backend = "stub";
    std::filesystem::path output_dir;
    /// Longer image side used for masks and synthesis; 0 keeps the native size.
    int working_size = 0;
    bool persist_intermediates = true;

    /// Throws ContractViolation naming the first invalid field.
    void validate() const;
};

struct EditResult {
    MaskPair masks;
    std::vector<RgbImage> garments;  // backend output after compositing
    std::vector<RgbImage> edited;    // after head stitching
};

/// Masks, synthesis and stitching for one image already in memory.
EditResult edit_image(const RgbImage& source, const LabelMap& labels, const std::string& prompt,
                      const MaskGenConfig& masks, const SynthesisParams& params,
                      InpaintingBackend& backend);

/// Scales image and labels so the longer side equals `working_size`.
void to_working_resolution(RgbImage& image, LabelMap& labels, int working_size);

/// Loads the job's image, obtains labels, runs the edit, and writes
/// `edited_<v>.png` (plus masks and garments when persisting) to output_dir.
EditResult run_edit(const EditJobSpec& spec, LabelProvider& parser, InpaintingBackend& backend);

/// Stable per-generation seed.
std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& image_id,
                          std::size_t prompt_id, int variation);

/// One prompt per non-empty line; '#' starts a comment line.
std::vector<std::string> load_prompts(const std::filesystem::path& path);

}  // namespace dicti
