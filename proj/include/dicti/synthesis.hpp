#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dicti/image.hpp"

namespace dicti {

/// The inpainting backend could not produce an image.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kPromptSuffix =
    ", photorealism, detailed hands, natural lightning, sharp";

/// Appends the fixed quality suffix. No deduplication against the input.
std::string augment_prompt(std::string_view prompt);

/// Source image with the inpainting region zeroed (black).
RgbImage masked_image(const RgbImage& image, const BinaryMask& mask);

/// Conservative covering: a latent cell is set when any pixel it spans is set.
/// Cells are rational when the mask size is not a multiple of the grid.
BinaryMask downsample_mask(const BinaryMask& mask, int latent_width, int latent_height);

struct SynthesisParams {
    std::uint64_t seed = 0;
    int steps = 50;
    double guidance_scale = 7.5;
    int variations = 4;

    void validate() const;
};

struct SynthesisRequest {
    RgbImage image;
    BinaryMask mask;      // inpainting region
    std::string prompt;   // already augmented
    SynthesisParams params;

    void validate() const;
};

/// Adapter over a text-conditioned inpainting model. Implementations must be
/// deterministic for a fixed (request, seed) and return an image of the
/// request's dimensions; pixels outside the mask are overwritten afterwards.
class InpaintingBackend {
public:
    virtual ~InpaintingBackend() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    virtual RgbImage inpaint(const SynthesisRequest& request, std::uint64_t seed) = 0;
};

/// Deterministic non-neural fill used to exercise the pipeline without weights.
RgbImage stub_fill(const SynthesisRequest& request, std::uint64_t seed);

class StubBackend final : public InpaintingBackend {
public:
    [[nodiscard]] std::string name() const override { return "stub"; }
    RgbImage inpaint(const SynthesisRequest& request, std::uint64_t seed) override {
        return stub_fill(request, seed);
    }
};

/// Settings for the latent-diffusion adapter, read from a JSON config file.
struct DiffusionConfig {
    std::string model = "stabilityai/stable-diffusion-2-inpainting";
    std::string device = "cuda";
    int steps = 50;
    double guidance_scale = 7.5;
    bool deterministic = true;
    int resolution = 512;     // native square resolution of the model
    int latent_factor = 8;    // encoder downsampling factor
    std::vector<std::string> command{"python3", "scripts/diffusers_inpaint.py"};
    std::filesystem::path work_dir;  // empty: system temp directory

    static DiffusionConfig load(const std::filesystem::path& path);
};

/// Runs an external inference process per image. The request is letterboxed
/// to the model resolution; the process receives the image, pixel mask,
/// masked image, latent-resolution mask and prompt, and writes one PNG.
class DiffusionBackend final : public InpaintingBackend {
public:
    explicit DiffusionBackend(DiffusionConfig config);
    [[nodiscard]] std::string name() const override { return "diffusion"; }
    RgbImage inpaint(const SynthesisRequest& request, std::uint64_t seed) override;

    [[nodiscard]] const DiffusionConfig& config() const { return config_; }

private:
    DiffusionConfig config_;
};

/// Serializes all calls to one backend instance through a single worker thread.
class BackendWorker {
public:
    explicit BackendWorker(std::shared_ptr<InpaintingBackend> backend);
    ~BackendWorker();
    BackendWorker(const BackendWorker&) = delete;
    BackendWorker& operator=(const BackendWorker&) = delete;

    std::future<std::vector<RgbImage>> submit(SynthesisRequest request);
    [[nodiscard]] InpaintingBackend& backend() { return *backend_; }

private:
    void run();

    std::shared_ptr<InpaintingBackend> backend_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::packaged_task<std::vector<RgbImage>()>> queue_;
    bool stopping_ = false;
    std::thread thread_;
};

/// Produces `variations` garment images. Variation v uses seed + v, and every
/// pixel outside the mask is copied back from the source.
std::vector<RgbImage> synthesize(const SynthesisRequest& request, InpaintingBackend& backend);

/// "stub" or "diffusion"; the diffusion backend requires a config file.
std::shared_ptr<InpaintingBackend> make_backend(const std::string& name,
                                                const std::filesystem::path& config_path = {});

}  // namespace dicti
