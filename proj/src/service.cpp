#include "dicti/service.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <httplib.h>

#include <algorithm>
#include <cstdio>

#include "dicti/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dicti {

namespace {

constexpr int kMaxRadius = 2048;
constexpr int kMaxVariations = 16;
constexpr int kMaxSteps = 1000;

std::string random_id() {
    unsigned char raw[16];
    if (RAND_bytes(raw, sizeof(raw)) != 1) throw std::runtime_error("RAND_bytes failed");
    std::string out;
    out.reserve(32);
    char buf[3];
    for (unsigned char b : raw) {
        std::snprintf(buf, sizeof(buf), "%02x", b);
        out += buf;
    }
    return out;
}

std::string base64(const Bytes& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

int int_field(const json& j, const char* key, int fallback, int lo, int hi) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw validation_error(key, std::string(key) + " must be an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > hi) {
        throw validation_error(key, std::string(key) + " must be in [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
    }
    return static_cast<int>(x);
}

LabelSet labels_field(const json& j, const char* key, const LabelSet& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    const json& v = j.at(key);
    if (!v.is_array()) throw validation_error(key, std::string(key) + " must be an array of labels");
    LabelSet out;
    for (const auto& item : v) {
        if (!item.is_number_integer() || item.get<long long>() < 1 || item.get<long long>() > kMaxLabel) {
            throw validation_error(key, std::string(key) + " entries must be integers in [1, 24]");
        }
        out.insert(item.get<int>());
    }
    return out;
}

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

RgbImage decode_upload(const Bytes& bytes) {
    try {
        return decode_rgb(bytes);
    } catch (const ImageDecodeError& e) {
        throw validation_error("image", std::string("image does not decode: ") + e.what());
    }
}

LabelMap decode_labels_upload(const Bytes& bytes, const RgbImage& image) {
    LabelMap labels;
    try {
        labels = decode_label_map(bytes);
    } catch (const std::exception& e) {
        throw validation_error("labels", std::string("label map does not decode: ") + e.what());
    }
    if (labels.size() != image.size()) {
        throw validation_error("labels", "label map is " + to_string(labels.size()) + " but image is " +
                                             to_string(image.size()));
    }
    return labels;
}

}  // namespace

json ServiceError::body() const {
    json b{{"code", code_}, {"message", what()}};
    if (field_) b["field"] = *field_;
    return b;
}

ServiceError validation_error(const std::string& field, const std::string& message) {
    return ServiceError(400, "validation_error", message, field);
}

MaskGenConfig parse_mask_config(const json& j) {
    if (!j.is_object()) throw validation_error("spec", "spec must be a JSON object");
    MaskGenConfig cfg;
    cfg.d = int_field(j, "d", cfg.d, 0, kMaxRadius);
    cfg.e = int_field(j, "e", cfg.e, 0, kMaxRadius);
    cfg.f = int_field(j, "f", cfg.f, 0, kMaxRadius);
    cfg.body_labels = labels_field(j, "body_labels", cfg.body_labels);
    cfg.preserved_labels = labels_field(j, "preserved_labels", cfg.preserved_labels);
    cfg.head_labels = labels_field(j, "head_labels", cfg.head_labels);
    try {
        cfg.validate();
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        throw validation_error(msg.substr(0, msg.find_first_of(": ")), msg);
    }
    return cfg;
}

JobSpec parse_job_spec(const json& j) {
    JobSpec spec;
    spec.masks = parse_mask_config(j);
    if (!j.contains("prompt") || !j.at("prompt").is_string()) {
        throw validation_error("prompt", "prompt is required");
    }
    spec.prompt = j.at("prompt").get<std::string>();
    if (spec.prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw validation_error("prompt", "prompt must not be blank");
    }
    if (j.contains("seed") && !j.at("seed").is_null()) {
        const json& seed = j.at("seed");
        if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
            throw validation_error("seed", "seed must be a non-negative integer");
        }
        spec.synthesis.seed = j.at("seed").get<std::uint64_t>();
    }
    spec.synthesis.steps = int_field(j, "steps", spec.synthesis.steps, 1, kMaxSteps);
    spec.synthesis.variations = int_field(j, "variations", spec.synthesis.variations, 1, kMaxVariations);
    if (j.contains("guidance_scale") && !j.at("guidance_scale").is_null()) {
        const json& g = j.at("guidance_scale");
        if (!g.is_number() || !(g.get<double>() > 0) || !std::isfinite(g.get<double>())) {
            throw validation_error("guidance_scale", "guidance_scale must be a finite number > 0");
        }
        spec.synthesis.guidance_scale = g.get<double>();
    }
    if (j.contains("backend") && !j.at("backend").is_null()) {
        if (!j.at("backend").is_string()) throw validation_error("backend", "backend must be a string");
        spec.backend = j.at("backend").get<std::string>();
    } else {
        spec.backend.clear();
    }
    return spec;
}

JobService::JobService(ServiceConfig config, std::shared_ptr<InpaintingBackend> backend)
    : config_(std::move(config)),
      backend_(backend ? std::move(backend) : make_backend(config_.backend, config_.backend_config)),
      backend_name_(backend_->name()),
      store_(config_.data_dir / "images"),
      ledger_(config_.data_dir / "jobs.jsonl") {
    if (!config_.parser_command.empty()) parser_ = std::make_unique<ExternalParser>(config_.parser_command);
    recover();
    if (config_.start_worker) start();
}

JobService::~JobService() { stop(); }

void JobService::recover() {
    std::vector<Job> replayed = ledger_.replayed();
    for (auto& job : replayed) {
        next_sequence_ = std::max(next_sequence_, job.sequence + 1);
        if (job.status == JobStatus::Running) {
            if (job.recoveries == 0) {
                // Interrupted once: run it again, keeping the forward-only status.
                job.recoveries = 1;
                ledger_.record_recovered(job);
                queue_.push_back(job.id);
            } else {
                job.status = JobStatus::Failed;
                job.finished_at = utc_timestamp();
                job.error = "interrupted again after recovery";
                ledger_.record_failed(job);
            }
        } else if (job.status == JobStatus::Queued) {
            queue_.push_back(job.id);
        }
        jobs_[job.id] = job;
    }
    maybe_compact();
}

void JobService::start() {
    std::lock_guard lock(mutex_);
    if (worker_.joinable()) return;
    stopping_ = false;
    worker_ = std::thread([this] { worker_loop(); });
}

void JobService::stop() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

bool JobService::wait_idle(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return idle_cv_.wait_for(lock, timeout, [this] { return queue_.empty() && !busy_; });
}

Job JobService::snapshot(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw ServiceError(404, "not_found", "no job with id '" + id + "'");
    return it->second;
}

Job JobService::submit(const Bytes& image, const std::optional<Bytes>& labels, const json& spec_json) {
    JobSpec spec = parse_job_spec(spec_json);
    if (spec.backend.empty()) {
        spec.backend = backend_name_;
    } else if (spec.backend != backend_name_) {
        throw validation_error("backend", "this service runs the '" + backend_name_ + "' backend");
    }
    const RgbImage decoded = decode_upload(image);
    if (labels) {
        (void)decode_labels_upload(*labels, decoded);
    } else if (!parser_) {
        throw validation_error("labels", "a label map upload is required when no parser is configured");
    }

    Job job;
    job.id = random_id();
    job.spec = std::move(spec);
    job.source_image_id = store_.put(image);
    if (labels) job.labels_image_id = store_.put(*labels);
    job.created_at = utc_timestamp();
    {
        std::lock_guard lock(mutex_);
        if (queue_.size() >= config_.max_queue_depth) {
            throw ServiceError(503, "queue_full", "the job queue is full; retry later");
        }
        job.sequence = next_sequence_++;
        ledger_.record_created(job);
        jobs_[job.id] = job;
        queue_.push_back(job.id);
    }
    cv_.notify_all();
    return job;
}

Job JobService::get(const std::string& id) const { return snapshot(id); }

std::vector<Job> JobService::list() const {
    std::lock_guard lock(mutex_);
    std::vector<Job> out;
    out.reserve(jobs_.size());
    for (const auto& [id, job] : jobs_) out.push_back(job);
    std::sort(out.begin(), out.end(), [](const Job& a, const Job& b) { return a.sequence < b.sequence; });
    return out;
}

ImageRecord JobService::image(const std::string& id) const {
    auto rec = store_.get(id);
    if (!rec) throw ServiceError(404, "not_found", "no image with id '" + id + "'");
    return std::move(*rec);
}

json JobService::health() const {
    std::lock_guard lock(mutex_);
    return json{{"status", "ok"},
                {"backend", backend_name_},
                {"queued", queue_.size()},
                {"running", busy_},
                {"jobs", jobs_.size()},
                {"parser", parser_ != nullptr}};
}

LabelMap JobService::labels_for(const RgbImage& image, const std::optional<std::string>& labels_id) const {
    if (labels_id) {
        const auto rec = store_.get(*labels_id);
        if (!rec) throw ParserError("stored label map " + *labels_id + " is missing");
        LabelMap labels = decode_label_map(rec->bytes);
        require_same_size(image.size(), labels.size(), "label map");
        return labels;
    }
    if (!parser_) throw ParserError("no label map and no parser configured");
    return parser_->labels_for(image, std::nullopt);
}

json JobService::preview_mask(const Bytes& image, const std::optional<Bytes>& labels, const json& cfg_json) const {
    const MaskGenConfig cfg = parse_mask_config(cfg_json.is_null() ? json::object() : cfg_json);
    const RgbImage decoded = decode_upload(image);
    LabelMap label_map;
    if (labels) {
        label_map = decode_labels_upload(*labels, decoded);
    } else if (parser_) {
        try {
            label_map = parser_->labels_for(decoded, std::nullopt);
        } catch (const ParserError& e) {
            throw ServiceError(502, "parser_error", e.what());
        }
    } else {
        throw validation_error("labels", "a label map upload is required when no parser is configured");
    }
    const MaskPair masks = generate_masks(label_map, cfg);
    if (!masks.inpaint.any()) {
        throw ServiceError(422, "no_subject", "no subject detected: the inpainting mask is empty");
    }
    const double total = static_cast<double>(decoded.size().area());
    const auto inpaint_area = masks.inpaint.count();
    const auto head_area = masks.head.count();
    return json{
        {"inpaint_png", base64(encode_png(masks.inpaint))},
        {"head_png", base64(encode_png(masks.head))},
        {"stats",
         {{"width", decoded.width()},
          {"height", decoded.height()},
          {"inpaint_area_px", inpaint_area},
          {"head_area_px", head_area},
          {"inpaint_fraction", static_cast<double>(inpaint_area) / total},
          {"head_fraction", static_cast<double>(head_area) / total}}},
    };
}

void JobService::maybe_compact() {
    std::lock_guard lock(mutex_);
    if (ledger_.appends_since_compaction() < config_.compaction_interval) return;
    std::vector<Job> all;
    all.reserve(jobs_.size());
    for (const auto& [id, job] : jobs_) all.push_back(job);
    std::sort(all.begin(), all.end(), [](const Job& a, const Job& b) { return a.sequence < b.sequence; });
    ledger_.compact(all);
}

void JobService::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
            busy_ = true;
        }
        execute(id);
        {
            std::lock_guard lock(mutex_);
            busy_ = false;
        }
        idle_cv_.notify_all();
        maybe_compact();
    }
}

void JobService::execute(const std::string& id) {
    Job job;
    {
        std::lock_guard lock(mutex_);
        Job& live = jobs_.at(id);
        if (live.terminal()) return;
        live.status = JobStatus::Running;
        live.started_at = utc_timestamp();
        job = live;
        ledger_.record_started(job);
    }

    std::vector<std::string> results;
    std::optional<std::string> error;
    try {
        const auto source = store_.get(job.source_image_id);
        if (!source) throw std::runtime_error("source image " + job.source_image_id + " is missing");
        const RgbImage image = decode_rgb(source->bytes);
        const LabelMap labels = labels_for(image, job.labels_image_id);
        const EditResult result =
            edit_image(image, labels, job.spec.prompt, job.spec.masks, job.spec.synthesis, *backend_);
        for (const auto& edited : result.edited) results.push_back(store_.put(encode_png(edited)));
        if (results.empty()) throw BackendError("backend returned no images");
    } catch (const std::exception& e) {
        error = e.what();
    }

    {
        std::lock_guard lock(mutex_);
        Job& live = jobs_.at(id);
        live.finished_at = utc_timestamp();
        if (error) {
            live.status = JobStatus::Failed;
            live.error = error;
        } else {
            live.status = JobStatus::Done;
            live.result_image_ids = results;
        }
        if (error) {
            ledger_.record_failed(live);
        } else {
            ledger_.record_done(live);
        }
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::optional<Bytes> form_file(const httplib::Request& req, const char* key) {
    if (!req.has_file(key)) return std::nullopt;
    return to_bytes(req.get_file_value(key).content);
}

json form_json(const httplib::Request& req, const char* key) {
    if (!req.has_file(key)) return json::object();
    const std::string text = req.get_file_value(key).content;
    if (text.empty()) return json::object();
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw validation_error(key, std::string(key) + " is not valid JSON: " + e.what());
    }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ServiceError& e) {
            send_json(res, e.http_status(), e.body());
        } catch (const std::exception& e) {
            send_json(res, 500, json{{"code", "internal_error"}, {"message", e.what()}});
        }
    };
}

Bytes required_image(const httplib::Request& req) {
    if (!req.is_multipart_form_data()) throw validation_error("image", "expected multipart/form-data");
    auto image = form_file(req, "image");
    if (!image || image->empty()) throw validation_error("image", "an image file is required");
    return std::move(*image);
}

}  // namespace

void install_routes(httplib::Server& server, JobService& service, const std::optional<fs::path>& static_dir) {
    server.Post("/api/jobs", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    const Bytes image = required_image(req);
                    const Job job = service.submit(image, form_file(req, "labels"), form_json(req, "spec"));
                    send_json(res, 202, to_json(job));
                }));
    server.Get("/api/jobs", guarded([&service](const httplib::Request&, httplib::Response& res) {
                   json out = json::array();
                   for (const auto& job : service.list()) out.push_back(to_json(job));
                   send_json(res, 200, out);
               }));
    server.Get(R"(/api/jobs/([^/]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, to_json(service.get(req.matches[1])));
               }));
    server.Post("/api/preview-mask", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                    const Bytes image = required_image(req);
                    send_json(res, 200, service.preview_mask(image, form_file(req, "labels"), form_json(req, "spec")));
                }));
    server.Get(R"(/api/images/([^/]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                   const ImageRecord rec = service.image(req.matches[1]);
                   res.status = 200;
                   res.set_header("Cache-Control", "public, max-age=31536000, immutable");
                   res.set_content(std::string(rec.bytes.begin(), rec.bytes.end()), rec.media_type);
               }));
    server.Get("/api/health", guarded([&service](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, service.health());
               }));
    if (static_dir) {
        if (!server.set_mount_point("/", static_dir->string())) {
            throw std::runtime_error("static directory not found: " + static_dir->string());
        }
    }
}

}  // namespace dicti
