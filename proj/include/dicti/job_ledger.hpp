#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dicti/maskgen.hpp"
#include "dicti/synthesis.hpp"

namespace dicti {

enum class JobStatus { Queued, Running, Done, Failed };

std::string to_string(JobStatus s);
JobStatus job_status_from_string(const std::string& s);

struct JobSpec {
    std::string prompt;
    MaskGenConfig masks;
    SynthesisParams synthesis;
    std::string backend = "stub";
};

struct Job {
    std::string id;
    JobStatus status = JobStatus::Queued;
    JobSpec spec;
    std::string source_image_id;
    std::optional<std::string> labels_image_id;
    std::string created_at;
    std::optional<std::string> started_at;
    std::optional<std::string> finished_at;
    std::vector<std::string> result_image_ids;
    std::optional<std::string> error;
    std::uint64_t sequence = 0;  // creation order
    int recoveries = 0;          // times re-run after an interrupted start

    [[nodiscard]] bool terminal() const {
        return status == JobStatus::Done || status == JobStatus::Failed;
    }
};

nlohmann::json to_json(const JobSpec& spec);
nlohmann::json to_json(const Job& job);
Job job_from_json(const nlohmann::json& j);

std::string utc_timestamp();

/// Append-only JSON-lines event log of job state. Replaying the log yields
/// the latest state of every job; `compact` rewrites it as one snapshot per
/// job (temp file + rename). All methods are thread-safe.
class JobLedger {
public:
    explicit JobLedger(std::filesystem::path path);

    /// Jobs reconstructed from the file at construction, by sequence.
    [[nodiscard]] std::vector<Job> replayed() const;

    void record_created(const Job& job);
    void record_started(const Job& job);
    void record_recovered(const Job& job);
    void record_done(const Job& job);
    void record_failed(const Job& job);

    /// Rewrites the ledger from the given jobs.
    void compact(const std::vector<Job>& jobs);
    [[nodiscard]] std::size_t appends_since_compaction() const;

private:
    void append(const nlohmann::json& event);
    void open_for_append();

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::ofstream out_;
    std::vector<Job> replayed_;
    std::size_t appends_ = 0;
};

}  // namespace dicti
