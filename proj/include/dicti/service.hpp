#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dicti/image_store.hpp"
#include "dicti/job_ledger.hpp"
#include "dicti/pipeline.hpp"

namespace httplib {
class Server;
}

namespace dicti {

/// Error surfaced to API clients as `{code, message, field?}`.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int http_status, std::string code, const std::string& message,
                 std::optional<std::string> field = std::nullopt)
        : std::runtime_error(message),
          http_status_(http_status),
          code_(std::move(code)),
          field_(std::move(field)) {}

    [[nodiscard]] int http_status() const { return http_status_; }
    [[nodiscard]] const std::string& code() const { return code_; }
    [[nodiscard]] const std::optional<std::string>& field() const { return field_; }
    [[nodiscard]] nlohmann::json body() const;

private:
    int http_status_;
    std::string code_;
    std::optional<std::string> field_;
};

ServiceError validation_error(const std::string& field, const std::string& message);

/// Parses a client-supplied spec object. Absent fields take defaults;
/// malformed ones raise a validation error naming the field.
JobSpec parse_job_spec(const nlohmann::json& j);
/// Mask fields only (d, e, f and label groups).
MaskGenConfig parse_mask_config(const nlohmann::json& j);

struct ServiceConfig {
    std::filesystem::path data_dir = "data/service";
    std::string backend = "stub";
    std::filesystem::path backend_config;
    /// External human parser; empty means label maps must be uploaded.
    std::vector<std::string> parser_command;
    std::size_t max_queue_depth = 64;
    /// Ledger is compacted after this many appends.
    std::size_t compaction_interval = 256;
    bool start_worker = true;
};

class JobService {
public:
    /// `backend` overrides the one named in the config (used by tests).
    explicit JobService(ServiceConfig config, std::shared_ptr<InpaintingBackend> backend = nullptr);
    ~JobService();
    JobService(const JobService&) = delete;
    JobService& operator=(const JobService&) = delete;

    Job submit(const Bytes& image, const std::optional<Bytes>& labels, const nlohmann::json& spec);
    [[nodiscard]] Job get(const std::string& id) const;
    [[nodiscard]] std::vector<Job> list() const;
    [[nodiscard]] nlohmann::json preview_mask(const Bytes& image, const std::optional<Bytes>& labels,
                                              const nlohmann::json& cfg) const;
    [[nodiscard]] ImageRecord image(const std::string& id) const;
    [[nodiscard]] nlohmann::json health() const;

    void start();
    void stop();
    /// Blocks until the queue is empty and no job is running, or the timeout expires.
    bool wait_idle(std::chrono::milliseconds timeout);
    [[nodiscard]] const std::string& backend_name() const { return backend_name_; }

private:
    void recover();
    void worker_loop();
    void execute(const std::string& id);
    LabelMap labels_for(const RgbImage& image, const std::optional<std::string>& labels_id) const;
    void maybe_compact();
    Job snapshot(const std::string& id) const;

    ServiceConfig config_;
    std::shared_ptr<InpaintingBackend> backend_;
    std::string backend_name_;
    std::unique_ptr<ExternalParser> parser_;
    ImageStore store_;
    JobLedger ledger_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, Job> jobs_;
    std::deque<std::string> queue_;
    std::uint64_t next_sequence_ = 0;
    bool busy_ = false;
    bool stopping_ = false;
    std::thread worker_;
};

/// Registers the HTTP JSON API. When `static_dir` is set it is mounted at "/".
void install_routes(httplib::Server& server, JobService& service,
                    const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace dicti
