#include "dicti/job_ledger.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dicti {

std::string to_string(JobStatus s) {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "unknown";
}

JobStatus job_status_from_string(const std::string& s) {
    if (s == "queued") return JobStatus::Queued;
    if (s == "running") return JobStatus::Running;
    if (s == "done") return JobStatus::Done;
    if (s == "failed") return JobStatus::Failed;
    throw std::invalid_argument("unknown job status '" + s + "'");
}

std::string utc_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const std::time_t t = system_clock::to_time_t(now);
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

json to_json(const JobSpec& spec) {
    return json{
        {"prompt", spec.prompt},
        {"d", spec.masks.d},
        {"e", spec.masks.e},
        {"f", spec.masks.f},
        {"body_labels", spec.masks.body_labels.to_vector()},
        {"preserved_labels", spec.masks.preserved_labels.to_vector()},
        {"head_labels", spec.masks.head_labels.to_vector()},
        {"seed", spec.synthesis.seed},
        {"steps", spec.synthesis.steps},
        {"guidance_scale", spec.synthesis.guidance_scale},
        {"variations", spec.synthesis.variations},
        {"backend", spec.backend},
    };
}

namespace {

JobSpec spec_from_json(const json& j) {
    JobSpec s;
    s.prompt = j.at("prompt").get<std::string>();
    s.masks.d = j.at("d").get<int>();
    s.masks.e = j.at("e").get<int>();
    s.masks.f = j.at("f").get<int>();
    s.masks.body_labels = LabelSet::from_vector(j.at("body_labels").get<std::vector<int>>());
    s.masks.preserved_labels = LabelSet::from_vector(j.at("preserved_labels").get<std::vector<int>>());
    s.masks.head_labels = LabelSet::from_vector(j.at("head_labels").get<std::vector<int>>());
    s.synthesis.seed = j.at("seed").get<std::uint64_t>();
    s.synthesis.steps = j.at("steps").get<int>();
    s.synthesis.guidance_scale = j.at("guidance_scale").get<double>();
    s.synthesis.variations = j.at("variations").get<int>();
    s.backend = j.at("backend").get<std::string>();
    return s;
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

json to_json(const Job& job) {
    return json{
        {"id", job.id},
        {"status", to_string(job.status)},
        {"spec", to_json(job.spec)},
        {"source_image_id", job.source_image_id},
        {"labels_image_id", optional_json(job.labels_image_id)},
        {"created_at", job.created_at},
        {"started_at", optional_json(job.started_at)},
        {"finished_at", optional_json(job.finished_at)},
        {"result_image_ids", job.result_image_ids},
        {"error", optional_json(job.error)},
        {"sequence", job.sequence},
        {"recoveries", job.recoveries},
    };
}

Job job_from_json(const json& j) {
    Job job;
    job.id = j.at("id").get<std::string>();
    job.status = job_status_from_string(j.at("status").get<std::string>());
    job.spec = spec_from_json(j.at("spec"));
    job.source_image_id = j.at("source_image_id").get<std::string>();
    job.labels_image_id = optional_from<std::string>(j, "labels_image_id");
    job.created_at = j.at("created_at").get<std::string>();
    job.started_at = optional_from<std::string>(j, "started_at");
    job.finished_at = optional_from<std::string>(j, "finished_at");
    job.result_image_ids = j.value("result_image_ids", std::vector<std::string>{});
    job.error = optional_from<std::string>(j, "error");
    job.sequence = j.value("sequence", std::uint64_t{0});
    job.recoveries = j.value("recoveries", 0);
    return job;
}

JobLedger::JobLedger(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::map<std::string, Job> jobs;
    if (std::ifstream in(path_); in) {
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            json ev;
            try {
                ev = json::parse(line);
            } catch (const json::exception&) {
                // A crash can leave a torn final line; earlier lines stay authoritative.
                continue;
            }
            const std::string type = ev.value("event", "");
            if (type == "created" || type == "snapshot") {
                Job job = job_from_json(ev.at("job"));
                jobs[job.id] = std::move(job);
                continue;
            }
            const auto it = jobs.find(ev.value("id", ""));
            if (it == jobs.end()) continue;
            Job& job = it->second;
            if (type == "started") {
                job.status = JobStatus::Running;
                job.started_at = ev.value("at", "");
            } else if (type == "recovered") {
                job.recoveries = ev.value("recoveries", job.recoveries + 1);
            } else if (type == "done") {
                job.status = JobStatus::Done;
                job.finished_at = ev.value("at", "");
                job.result_image_ids = ev.value("results", std::vector<std::string>{});
            } else if (type == "failed") {
                job.status = JobStatus::Failed;
                job.finished_at = ev.value("at", "");
                job.error = ev.value("error", "");
            }
        }
    }
    for (auto& [id, job] : jobs) replayed_.push_back(std::move(job));
    std::sort(replayed_.begin(), replayed_.end(),
              [](const Job& a, const Job& b) { return a.sequence < b.sequence; });
    open_for_append();
}

std::vector<Job> JobLedger::replayed() const {
    std::lock_guard lock(mutex_);
    return replayed_;
}

void JobLedger::open_for_append() {
    out_.close();
    out_.clear();
    out_.open(path_, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open job ledger " + path_.string());
}

void JobLedger::append(const json& event) {
    std::lock_guard lock(mutex_);
    out_ << event.dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("job ledger write failed: " + path_.string());
    ++appends_;
}

void JobLedger::record_created(const Job& job) { append({{"event", "created"}, {"job", to_json(job)}}); }

void JobLedger::record_started(const Job& job) {
    append({{"event", "started"}, {"id", job.id}, {"at", job.started_at.value_or("")}});
}

void JobLedger::record_recovered(const Job& job) {
    append({{"event", "recovered"}, {"id", job.id}, {"recoveries", job.recoveries}});
}

void JobLedger::record_done(const Job& job) {
    append({{"event", "done"},
            {"id", job.id},
            {"at", job.finished_at.value_or("")},
            {"results", job.result_image_ids}});
}

void JobLedger::record_failed(const Job& job) {
    append({{"event", "failed"},
            {"id", job.id},
            {"at", job.finished_at.value_or("")},
            {"error", job.error.value_or("")}});
}

void JobLedger::compact(const std::vector<Job>& jobs) {
    std::lock_guard lock(mutex_);
    auto tmp = path_;
    tmp += ".compact";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        for (const auto& job : jobs) out << json{{"event", "snapshot"}, {"job", to_json(job)}}.dump() << '\n';
        out.flush();
        if (!out) throw std::runtime_error("job ledger compaction failed");
    }
    out_.close();
    fs::rename(tmp, path_);
    open_for_append();
    appends_ = 0;
}

std::size_t JobLedger::appends_since_compaction() const {
    std::lock_guard lock(mutex_);
    return appends_;
}

}  // namespace dicti
