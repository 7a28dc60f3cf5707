#include "dicti/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "dicti/hashing.hpp"
#include "dicti/image_io.hpp"
#include "dicti/image_ops.hpp"
#include "subprocess.hpp"

namespace dicti {

RgbImage stitch(const RgbImage& generated, const RgbImage& source, const BinaryMask& head) {
    require_same_size(generated.size(), source.size(), "stitch");
    require_same_size(generated.size(), head.size(), "stitch");
    RgbImage out = generated;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (head.get(x, y)) {
                const std::uint8_t* s = source.at(x, y);
                out.set(x, y, s[0], s[1], s[2]);
            }
        }
    }
    return out;
}

namespace {

LabelMap checked_labels(LabelMap labels, const RgbImage& image, const std::string& origin) {
    if (labels.size() != image.size()) {
        throw ParserError("label map " + origin + " is " + to_string(labels.size()) +
                          " but the image is " + to_string(image.size()));
    }
    return labels;
}

LabelMap read_labels(const std::filesystem::path& path, const RgbImage& image) {
    try {
        return checked_labels(load_label_map(path), image, path.string());
    } catch (const ParserError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParserError(e.what());
    }
}

}  // namespace

LabelMap PrecomputedLabels::labels_for(const RgbImage& image,
                                       const std::optional<std::filesystem::path>& precomputed) {
    if (!precomputed) throw ParserError("no precomputed label map for this image");
    return read_labels(*precomputed, image);
}

ExternalParser::ExternalParser(std::vector<std::string> command) : command_(std::move(command)) {
    if (command_.empty()) throw ContractViolation("ExternalParser: empty command");
}

LabelMap ExternalParser::labels_for(const RgbImage& image,
                                    const std::optional<std::filesystem::path>& precomputed) {
    if (precomputed) return read_labels(*precomputed, image);
    const detail::WorkDir dir({}, "dicti-parse");
    save_png(dir / "image.png", image);
    if (const int rc = detail::run_logged(command_, {(dir / "image.png").string(), (dir / "labels.png").string()},
                                          dir / "log.txt");
        rc != 0) {
        throw ParserError("parser exited with status " + std::to_string(rc) + ": " + detail::log_tail(dir / "log.txt"));
    }
    return read_labels(dir / "labels.png", image);
}

void EditJobSpec::validate() const {
    if (prompt.empty()) throw ContractViolation("prompt: must not be empty");
    if (working_size < 0) throw ContractViolation("working_size: must be >= 0");
    masks.validate();
    synthesis.validate();
}

EditResult edit_image(const RgbImage& source, const LabelMap& labels, const std::string& prompt,
                      const MaskGenConfig& masks, const SynthesisParams& params,
                      InpaintingBackend& backend) {
    if (prompt.empty()) throw ContractViolation("prompt: must not be empty");
    require_same_size(source.size(), labels.size(), "edit_image");
    EditResult result;
    result.masks = generate_masks(labels, masks);
    if (!result.masks.inpaint.any()) {
        throw NoSubjectError("no subject detected: the inpainting mask is empty");
    }
    SynthesisRequest request{source, result.masks.inpaint, augment_prompt(prompt), params};
    result.garments = synthesize(request, backend);
    result.edited.reserve(result.garments.size());
    for (const auto& g : result.garments) {
        result.edited.push_back(stitch(g, source, result.masks.head));
    }
    return result;
}

void to_working_resolution(RgbImage& image, LabelMap& labels, int working_size) {
    if (working_size <= 0) return;
    const int longer = std::max(image.width(), image.height());
    if (longer == working_size) return;
    const double scale = static_cast<double>(working_size) / longer;
    const Size target{std::max(1, static_cast<int>(std::lround(image.width() * scale))),
                      std::max(1, static_cast<int>(std::lround(image.height() * scale)))};
    image = resize_bilinear(image, target);
    labels = resize_nearest(labels, target);
}

EditResult run_edit(const EditJobSpec& spec, LabelProvider& parser, InpaintingBackend& backend) {
    spec.validate();
    RgbImage source = load_rgb(spec.image);
    LabelMap labels = parser.labels_for(source, spec.labels);
    to_working_resolution(source, labels, spec.working_size);

    EditResult result = edit_image(source, labels, spec.prompt, spec.masks, spec.synthesis, backend);

    if (!spec.output_dir.empty()) {
        std::filesystem::create_directories(spec.output_dir);
        for (std::size_t v = 0; v < result.edited.size(); ++v) {
            save_png(spec.output_dir / ("edited_" + std::to_string(v) + ".png"), result.edited[v]);
        }
        if (spec.persist_intermediates) {
            save_png(spec.output_dir / "mask_inpaint.png", result.masks.inpaint);
            save_png(spec.output_dir / "mask_head.png", result.masks.head);
            for (std::size_t v = 0; v < result.garments.size(); ++v) {
                save_png(spec.output_dir / ("garment_" + std::to_string(v) + ".png"),
                         result.garments[v]);
            }
        }
    }
    return result;
}

std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& image_id,
                          std::size_t prompt_id, int variation) {
    std::uint64_t h = fnv1a64(base_seed);
    h = fnv1a64(image_id, h);
    h = fnv1a64(static_cast<std::uint64_t>(prompt_id), h);
    h = fnv1a64(static_cast<std::uint64_t>(variation), h);
    // Keep seeds in the non-negative int63 range accepted by common samplers.
    return splitmix64(h) >> 1;
}

std::vector<std::string> load_prompts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prompt file " + path.string());
    std::vector<std::string> prompts;
    for (std::string line; std::getline(in, line);) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        const auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        prompts.push_back(line.substr(start));
    }
    if (prompts.empty()) throw std::runtime_error("prompt file " + path.string() + " has no prompts");
    return prompts;
}

}  // namespace dicti
