#include "dicti/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dicti/hashing.hpp"
#include "dicti/image_io.hpp"
#include "dicti/image_ops.hpp"
#include "subprocess.hpp"

namespace dicti {

std::string augment_prompt(std::string_view prompt) {
    std::string out(prompt);
    out += kPromptSuffix;
    return out;
}

RgbImage masked_image(const RgbImage& image, const BinaryMask& mask) {
    require_same_size(image.size(), mask.size(), "masked_image");
    RgbImage out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (mask.get(x, y)) out.set(x, y, 0, 0, 0);
        }
    }
    return out;
}

BinaryMask downsample_mask(const BinaryMask& mask, int latent_width, int latent_height) {
    if (latent_width <= 0 || latent_height <= 0) {
        throw ContractViolation("downsample_mask: latent grid must be positive, got " +
                                std::to_string(latent_width) + "x" +
                                std::to_string(latent_height));
    }
    const long long W = mask.width();
    const long long H = mask.height();
    BinaryMask out(latent_width, latent_height);
    // Cell j spans [floor(j*H/h), ceil((j+1)*H/h)).
    for (long long j = 0; j < latent_height; ++j) {
        const long long y0 = j * H / latent_height;
        const long long y1 = ((j + 1) * H + latent_height - 1) / latent_height;
        for (long long i = 0; i < latent_width; ++i) {
            const long long x0 = i * W / latent_width;
            const long long x1 = ((i + 1) * W + latent_width - 1) / latent_width;
            bool any = false;
            for (long long y = y0; y < y1 && !any; ++y) {
                for (long long x = x0; x < x1; ++x) {
                    if (mask.get(static_cast<int>(x), static_cast<int>(y))) {
                        any = true;
                        break;
                    }
                }
            }
            if (any) out.set(static_cast<int>(i), static_cast<int>(j), true);
        }
    }
    return out;
}

void SynthesisParams::validate() const {
    if (steps <= 0) throw ContractViolation("steps: must be > 0");
    if (!(guidance_scale > 0) || !std::isfinite(guidance_scale)) {
        throw ContractViolation("guidance_scale: must be a finite value > 0");
    }
    if (variations < 1) throw ContractViolation("variations: must be >= 1");
}

void SynthesisRequest::validate() const {
    if (image.empty()) throw ContractViolation("image: empty");
    require_same_size(image.size(), mask.size(), "SynthesisRequest");
    if (prompt.empty()) throw ContractViolation("prompt: empty after augmentation");
    params.validate();
}

RgbImage stub_fill(const SynthesisRequest& request, std::uint64_t seed) {
    require_same_size(request.image.size(), request.mask.size(), "stub_fill");
    const std::uint64_t key = hash_combine(fnv1a64(seed), fnv1a64(request.prompt));
    std::uint8_t base[3];
    for (int c = 0; c < 3; ++c) base[c] = static_cast<std::uint8_t>((key >> (8 * c)) & 0xFF);

    RgbImage out = request.image;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (!request.mask.get(x, y)) continue;
            // Coarse 4x4 texture cells plus fine per-pixel grain.
            const std::uint64_t coarse = hash_combine(key, (static_cast<std::uint64_t>(y / 4) << 32) |
                                                               static_cast<std::uint32_t>(x / 4));
            const std::uint64_t fine = hash_combine(coarse, (static_cast<std::uint64_t>(y) << 32) |
                                                                static_cast<std::uint32_t>(x));
            std::uint8_t* p = out.at(x, y);
            for (int c = 0; c < 3; ++c) {
                const int v = base[c] + static_cast<int>((coarse >> (8 * c)) & 0x3F) - 32 +
                              static_cast<int>((fine >> (8 * c)) & 0x0F) - 8;
                p[c] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
            }
        }
    }
    return out;
}

std::vector<RgbImage> synthesize(const SynthesisRequest& request, InpaintingBackend& backend) {
    request.validate();
    std::vector<RgbImage> out;
    out.reserve(static_cast<std::size_t>(request.params.variations));
    for (int v = 0; v < request.params.variations; ++v) {
        const std::uint64_t seed = request.params.seed + static_cast<std::uint64_t>(v);
        RgbImage generated;
        try {
            generated = backend.inpaint(request, seed);
        } catch (const BackendError&) {
            throw;
        } catch (const std::exception& e) {
            throw BackendError("backend '" + backend.name() + "' failed on variation " +
                               std::to_string(v) + ": " + e.what());
        }
        if (generated.size() != request.image.size()) {
            throw BackendError("backend '" + backend.name() + "' returned " +
                               to_string(generated.size()) + ", expected " +
                               to_string(request.image.size()));
        }
        // Hard composite: unmasked pixels come from the source verbatim.
        for (int y = 0; y < generated.height(); ++y) {
            for (int x = 0; x < generated.width(); ++x) {
                if (!request.mask.get(x, y)) {
                    const std::uint8_t* s = request.image.at(x, y);
                    generated.set(x, y, s[0], s[1], s[2]);
                }
            }
        }
        out.push_back(std::move(generated));
    }
    return out;
}

// ---------------------------------------------------------------------------
// DiffusionBackend

DiffusionConfig DiffusionConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BackendError("cannot open backend config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("backend config " + path.string() + ": " + e.what());
    }
    DiffusionConfig cfg;
    try {
        const auto& d = j.contains("diffusion") ? j.at("diffusion") : j;
        cfg.model = d.value("model", cfg.model);
        cfg.device = d.value("device", cfg.device);
        cfg.steps = d.value("steps", cfg.steps);
        cfg.guidance_scale = d.value("guidance_scale", cfg.guidance_scale);
        cfg.deterministic = d.value("deterministic", cfg.deterministic);
        cfg.resolution = d.value("resolution", cfg.resolution);
        cfg.latent_factor = d.value("latent_factor", cfg.latent_factor);
        if (d.contains("command")) cfg.command = d.at("command").get<std::vector<std::string>>();
        if (d.contains("work_dir")) cfg.work_dir = d.at("work_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("backend config " + path.string() + ": " + e.what());
    }
    if (cfg.resolution <= 0 || cfg.latent_factor <= 0 || cfg.resolution % cfg.latent_factor != 0) {
        throw BackendError("backend config: resolution must be a positive multiple of latent_factor");
    }
    if (cfg.command.empty()) throw BackendError("backend config: command is empty");
    return cfg;
}

DiffusionBackend::DiffusionBackend(DiffusionConfig config) : config_(std::move(config)) {}

RgbImage DiffusionBackend::inpaint(const SynthesisRequest& request, std::uint64_t seed) {
    const Size native{config_.resolution, config_.resolution};
    const Letterbox box = Letterbox::fit(request.image.size(), native);
    const RgbImage image = box.apply(request.image);
    const BinaryMask mask = box.apply(request.mask);
    const int latent = config_.resolution / config_.latent_factor;

    const detail::WorkDir work(config_.work_dir, "dicti-synth");
    const auto& dir = work.path();
    save_png(dir / "image.png", image);
    save_png(dir / "mask.png", mask);
    save_png(dir / "masked_image.png", masked_image(image, mask));
    save_png(dir / "latent_mask.png", downsample_mask(mask, latent, latent));

    nlohmann::json req = {
        {"model", config_.model},
        {"device", config_.device},
        {"deterministic", config_.deterministic},
        {"prompt", request.prompt},
        {"seed", seed},
        {"steps", request.params.steps},
        {"guidance_scale", request.params.guidance_scale},
        {"width", native.width},
        {"height", native.height},
        {"latent_width", latent},
        {"latent_height", latent},
        {"latent_channels", 4},
        {"image", (dir / "image.png").string()},
        {"mask", (dir / "mask.png").string()},
        {"masked_image", (dir / "masked_image.png").string()},
        {"latent_mask", (dir / "latent_mask.png").string()},
        {"output", (dir / "output.png").string()},
    };
    {
        std::ofstream out(dir / "request.json");
        out << req.dump(2);
    }

    if (const int rc = detail::run_logged(config_.command, {"--request", (dir / "request.json").string()},
                                          dir / "log.txt");
        rc != 0) {
        throw BackendError("diffusion backend exited with status " + std::to_string(rc) + ": " +
                           detail::log_tail(dir / "log.txt"));
    }
    RgbImage generated;
    try {
        generated = load_rgb(dir / "output.png");
    } catch (const std::exception& e) {
        throw BackendError(std::string("diffusion backend produced no readable output: ") + e.what());
    }
    if (generated.size() != native) {
        generated = resize_bilinear(generated, native);
    }
    return box.invert(generated);
}

// ---------------------------------------------------------------------------
// BackendWorker

BackendWorker::BackendWorker(std::shared_ptr<InpaintingBackend> backend)
    : backend_(std::move(backend)), thread_([this] { run(); }) {}

BackendWorker::~BackendWorker() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    thread_.join();
}

std::future<std::vector<RgbImage>> BackendWorker::submit(SynthesisRequest request) {
    std::packaged_task<std::vector<RgbImage>()> task(
        [this, req = std::move(request)] { return synthesize(req, *backend_); });
    auto future = task.get_future();
    {
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(task));
    }
    cv_.notify_one();
    return future;
}

void BackendWorker::run() {
    for (;;) {
        std::packaged_task<std::vector<RgbImage>()> task;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

std::shared_ptr<InpaintingBackend> make_backend(const std::string& name,
                                                const std::filesystem::path& config_path) {
    if (name == "stub") return std::make_shared<StubBackend>();
    if (name == "diffusion") {
        if (config_path.empty()) {
            throw BackendError("backend 'diffusion' requires a config file (--backend-config)");
        }
        return std::make_shared<DiffusionBackend>(DiffusionConfig::load(config_path));
    }
    throw BackendError("unknown backend '" + name + "' (expected stub or diffusion)");
}

}  // namespace dicti
