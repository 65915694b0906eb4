#pragma once
// Persistent job queue running extractions on a worker pool, plus its HTTP front end.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kgprune/engine.hpp"
#include "kgprune/task_input.hpp"

namespace kgp {

enum class JobState : std::uint8_t { Pending, Running, Done, Failed };

std::string_view to_string(JobState s) noexcept;

using Clock = std::chrono::system_clock;

struct JobInfo {
    std::string id;
    std::uint64_t sequence = 0;   // submission order
    JobState state = JobState::Pending;
    Clock::time_point submitted_at;
    std::optional<Clock::time_point> started_at;
    std::optional<Clock::time_point> finished_at;
    ExtractionTask task;
    std::vector<std::string> warnings;
    std::optional<std::string> error;
    Progress progress;
    bool expired = false;
};

struct JobPage {
    std::vector<JobInfo> jobs;   // newest first
    std::size_t total = 0;
    std::size_t page = 0;
    std::size_t page_size = 0;
};

struct InputLineError {
    std::string file;   // "qids", "pids" or "extra_seeds"
    LineError error;
};

// A rejected submission; `lines` lists every malformed input line.
class SubmissionError : public Error {
public:
    SubmissionError(ErrorKind kind, const std::string& message, std::vector<InputLineError> lines = {})
        : Error(kind, message), lines_(std::move(lines)) {}
    const std::vector<InputLineError>& lines() const noexcept { return lines_; }

private:
    std::vector<InputLineError> lines_;
};

using Executor = std::function<ExtractionResult(const ExtractionTask&, const ProgressFn&)>;

struct ServiceConfig {
    std::filesystem::path data_dir = "kgp-data";
    unsigned workers = 0;   // 0: processor count capped at 4
    std::chrono::seconds retention = std::chrono::hours(24 * 7);
    std::size_t max_upload_bytes = 1 << 20;
    std::size_t reference_count = 0;   // for clamping k
    ExtractionTask defaults;           // seeds/properties ignored

    // KGP_DATA_DIR, KGP_WORKERS, KGP_RETENTION_DAYS.
    static ServiceConfig from_env();
    unsigned worker_count() const;
};

// Applies a JSON object of overrides (max_depth, degree_cap, k, tau, reference_mode,
// mode, whitelist) to `task`. Throws SubmissionError{ValidationError}.
void apply_options(ExtractionTask& task, std::string_view options_json);

class JobService {
public:
    // Replays the job log in `config.data_dir`; jobs that were pending or running are queued again.
    JobService(ServiceConfig config, Executor executor);
    ~JobService();
    JobService(const JobService&) = delete;
    JobService& operator=(const JobService&) = delete;

    // Throws SubmissionError (ValidationError, PayloadTooLarge).
    std::string submit(std::string_view qids, std::string_view pids, std::string_view options_json = {});
    std::string submit_task(ExtractionTask task);
    // Throws UnknownJob, ValidationError.
    std::string resubmit_with_seeds(const std::string& id, std::span<const std::string> extra_seeds);

    // Throws UnknownJob.
    JobInfo status(const std::string& id);
    JobPage list(std::size_t page, std::size_t page_size = 20);
    // Throws UnknownJob, NotReady, JobFailed (with the diagnostic), UnsupportedFormat, Gone.
    std::string result(const std::string& id, std::string_view format);

    // Blocks until no job is pending or running.
    void wait_idle();
    // Stops taking work and joins the workers; running extractions finish first.
    void shutdown();

    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct Job {
        JobInfo info;
    };

    void replay();
    void append_log(const std::string& line);
    void worker_loop();
    std::string enqueue(ExtractionTask task, std::vector<std::string> warnings);
    Job& find(const std::string& id);
    void expire_if_due(Job& job, Clock::time_point now);
    std::filesystem::path result_path(const std::string& id, std::string_view ext) const;

    ServiceConfig config_;
    Executor executor_;
    std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, Job> jobs_;
    std::deque<std::string> queue_;
    std::size_t running_ = 0;
    std::uint64_t next_sequence_ = 1;
    bool stopping_ = false;
    std::mutex log_mutex_;
    int log_fd_ = -1;
    std::vector<std::thread> workers_;
};

// JSON rendering shared by the HTTP layer and tests.
std::string job_json(const JobInfo& info);
std::string page_json(const JobPage& page);

int http_status(ErrorKind kind) noexcept;

class HttpApi {
public:
    // Without a static directory, "/" serves a short page listing the API.
    HttpApi(JobService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~HttpApi();

    // Returns the bound port (pass 0 for any free port). Throws IoError.
    int bind(const std::string& host, int port);
    void listen();          // blocks until stop()
    void start();           // listen on a background thread
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace kgp
