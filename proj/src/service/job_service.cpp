#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "json.hpp"
#include "kgprune/error.hpp"
#include "kgprune/export.hpp"
#include "kgprune/service.hpp"

namespace kgp {
namespace {

using nlohmann::json;

std::int64_t millis(Clock::time_point t) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

Clock::time_point from_millis(std::int64_t ms) {
    return Clock::time_point(std::chrono::milliseconds(ms));
}

std::string iso8601(Clock::time_point t) {
    const auto ms = millis(t);
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
    return buf;
}

json task_json(const ExtractionTask& t) {
    json seeds = json::array();
    for (EntityId s : t.seeds) seeds.push_back(to_string(s));
    json props = json::array();
    for (const auto& p : t.properties) props.push_back(to_string(p));
    json whitelist = json::array();
    for (EntityId w : t.whitelist) whitelist.push_back(to_string(w));
    return {{"seeds", seeds},
            {"properties", props},
            {"config",
             {{"max_depth", t.max_depth ? json(*t.max_depth) : json(nullptr)},
              {"degree_cap", t.degree_cap},
              {"k", t.k},
              {"tau", t.tau},
              {"reference_mode", to_string(t.reference_mode)},
              {"mode", to_string(t.mode)},
              {"whitelist", whitelist}}}};
}

ExtractionTask task_from_json(const json& j) {
    ExtractionTask t;
    for (const auto& s : j.at("seeds")) t.seeds.push_back(parse_entity_id(s.get<std::string>()));
    for (const auto& p : j.at("properties")) t.properties.push_back(parse_property_spec(p.get<std::string>()));
    apply_options(t, j.at("config").dump());
    return t;
}

[[noreturn]] void invalid_option(const std::string& what) {
    throw SubmissionError(ErrorKind::ValidationError, "options: " + what);
}

std::string new_job_id() {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) fail(ErrorKind::IoError, "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

std::string_view to_string(JobState s) noexcept {
    switch (s) {
        case JobState::Pending: return "pending";
        case JobState::Running: return "running";
        case JobState::Done: return "done";
        case JobState::Failed: return "failed";
    }
    return "?";
}

ServiceConfig ServiceConfig::from_env() {
    ServiceConfig c;
    const auto number = [](const char* name) -> std::optional<long> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (*end || n < 0) fail(ErrorKind::ValidationError, std::string(name) + " must be a non-negative integer");
        return n;
    };
    if (const char* dir = std::getenv("KGP_DATA_DIR"); dir && *dir) c.data_dir = dir;
    if (auto w = number("KGP_WORKERS")) c.workers = static_cast<unsigned>(*w);
    if (auto days = number("KGP_RETENTION_DAYS")) c.retention = std::chrono::hours(24 * *days);
    return c;
}

unsigned ServiceConfig::worker_count() const {
    if (workers > 0) return workers;
    return std::clamp(std::thread::hardware_concurrency(), 1u, 4u);
}

void apply_options(ExtractionTask& task, std::string_view options_json) {
    if (options_json.find_first_not_of(" \t\r\n") == std::string_view::npos) return;
    json j;
    try {
        j = json::parse(options_json);
    } catch (const json::parse_error& e) {
        invalid_option(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object()) invalid_option("expected a JSON object");
    const auto count = [](const json& v, const std::string& key) -> std::size_t {
        if (!v.is_number_unsigned()) invalid_option(key + " must be a non-negative integer");
        return v.get<std::size_t>();
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "max_depth") {
            if (v.is_null()) {
                task.max_depth.reset();
            } else {
                const auto d = count(v, key);
                if (d == 0 || d > 1000000) invalid_option("max_depth must be null or a positive integer");
                task.max_depth = static_cast<unsigned>(d);
            }
        } else if (key == "degree_cap") {
            task.degree_cap = count(v, key);
        } else if (key == "k") {
            task.k = count(v, key);
        } else if (key == "tau") {
            if (!v.is_number()) invalid_option("tau must be a number");
            task.tau = v.get<double>();
        } else if (key == "reference_mode") {
            const auto s = v.is_string() ? v.get<std::string>() : "";
            if (s == to_string(ReferenceMode::KeepOnly)) task.reference_mode = ReferenceMode::KeepOnly;
            else if (s == to_string(ReferenceMode::BothClasses)) task.reference_mode = ReferenceMode::BothClasses;
            else invalid_option("reference_mode must be keep-only or both-classes");
        } else if (key == "mode") {
            const auto s = v.is_string() ? v.get<std::string>() : "";
            if (s == to_string(ClassifierMode::Analogy)) task.mode = ClassifierMode::Analogy;
            else if (s == to_string(ClassifierMode::KeepAll)) task.mode = ClassifierMode::KeepAll;
            else if (s == to_string(ClassifierMode::Whitelist)) task.mode = ClassifierMode::Whitelist;
            else invalid_option("mode must be analogy, keep-all or whitelist");
        } else if (key == "whitelist") {
            if (!v.is_array()) invalid_option("whitelist must be a list of QIDs");
            task.whitelist.clear();
            for (const auto& q : v) {
                if (!q.is_string()) invalid_option("whitelist must be a list of QIDs");
                try {
                    task.whitelist.insert(parse_entity_id(q.get<std::string>()));
                } catch (const Error& e) {
                    invalid_option(std::string("whitelist: ") + e.what());
                }
            }
        } else {
            invalid_option("unknown option '" + key + "'");
        }
    }
}

JobService::JobService(ServiceConfig config, Executor executor)
    : config_(std::move(config)), executor_(std::move(executor)) {
    std::error_code ec;
    std::filesystem::create_directories(config_.data_dir / "results", ec);
    if (ec) fail(ErrorKind::IoError, "cannot create " + config_.data_dir.string() + ": " + ec.message());
    replay();
    const auto log_path = config_.data_dir / "jobs.log";
    log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (log_fd_ < 0) fail(ErrorKind::IoError, "cannot open " + log_path.string() + ": " + std::strerror(errno));

    const auto now = Clock::now();
    for (auto& [id, job] : jobs_) expire_if_due(job, now);

    for (unsigned i = 0, n = config_.worker_count(); i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

JobService::~JobService() {
    shutdown();
    if (log_fd_ >= 0) ::close(log_fd_);
}

void JobService::shutdown() {
    {
        std::lock_guard lock(mutex_);
        if (stopping_ && workers_.empty()) return;
        stopping_ = true;
    }
    work_cv_.notify_all();
    for (auto& w : workers_) w.join();
    workers_.clear();
}

void JobService::replay() {
    std::ifstream in(config_.data_dir / "jobs.log");
    std::vector<std::pair<std::uint64_t, std::string>> pending;
    for (std::string line; std::getline(in, line);) {
        json e;
        try {
            e = json::parse(line);
            const std::string event = e.at("event");
            const std::string id = e.at("id");
            const auto at = from_millis(e.at("at").get<std::int64_t>());
            if (event == "submitted") {
                Job job;
                job.info.id = id;
                job.info.sequence = e.at("seq").get<std::uint64_t>();
                job.info.submitted_at = at;
                job.info.task = task_from_json(e.at("task"));
                for (const auto& w : e.at("warnings")) job.info.warnings.push_back(w.get<std::string>());
                next_sequence_ = std::max(next_sequence_, job.info.sequence + 1);
                jobs_[id] = std::move(job);
                continue;
            }
            auto it = jobs_.find(id);
            if (it == jobs_.end()) continue;
            JobInfo& info = it->second.info;
            if (event == "started") {
                info.state = JobState::Running;
                info.started_at = at;
            } else if (event == "done") {
                info.state = JobState::Done;
                info.finished_at = at;
            } else if (event == "failed") {
                info.state = JobState::Failed;
                info.finished_at = at;
                info.error = e.at("error").get<std::string>();
            } else if (event == "expired") {
                info.expired = true;
            }
        } catch (const std::exception&) {
            continue;   // torn record from a crash mid-append
        }
    }
    for (auto& [id, job] : jobs_) {
        if (job.info.state == JobState::Running) {
            job.info.state = JobState::Pending;
            job.info.started_at.reset();
        }
        if (job.info.state == JobState::Pending) pending.emplace_back(job.info.sequence, id);
    }
    std::sort(pending.begin(), pending.end());
    for (auto& [seq, id] : pending) queue_.push_back(id);
}

void JobService::append_log(const std::string& line) {
    std::lock_guard lock(log_mutex_);
    const std::string record = line + "\n";
    std::size_t written = 0;
    while (written < record.size()) {
        const auto n = ::write(log_fd_, record.data() + written, record.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(ErrorKind::IoError, std::string("job log write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(log_fd_) != 0) fail(ErrorKind::IoError, std::string("job log sync failed: ") + std::strerror(errno));
}

std::filesystem::path JobService::result_path(const std::string& id, std::string_view ext) const {
    return config_.data_dir / "results" / (id + "." + std::string(ext));
}

std::string JobService::enqueue(ExtractionTask task, std::vector<std::string> warnings) {
    Job job;
    job.info.id = new_job_id();
    job.info.submitted_at = Clock::now();
    job.info.task = std::move(task);
    job.info.warnings = std::move(warnings);
    {
        std::lock_guard lock(mutex_);
        while (jobs_.contains(job.info.id)) job.info.id = new_job_id();
        job.info.sequence = next_sequence_++;
    }
    // Persisted before the id is handed out or a worker can see the job.
    append_log(json{{"event", "submitted"},
                    {"id", job.info.id},
                    {"seq", job.info.sequence},
                    {"at", millis(job.info.submitted_at)},
                    {"task", task_json(job.info.task)},
                    {"warnings", job.info.warnings}}
                   .dump());
    const std::string id = job.info.id;
    {
        std::lock_guard lock(mutex_);
        jobs_[id] = std::move(job);
        queue_.push_back(id);
    }
    work_cv_.notify_one();
    return id;
}

std::string JobService::submit_task(ExtractionTask task) {
    const auto diagnostics = validate(task, config_.reference_count);
    std::vector<std::string> warnings;
    std::string fatal;
    for (const auto& d : diagnostics) {
        if (d.severity == Diagnostic::Severity::Fatal) fatal += (fatal.empty() ? "" : "; ") + d.message;
        else warnings.push_back(d.message);
    }
    if (!fatal.empty()) throw SubmissionError(ErrorKind::ValidationError, fatal);
    return enqueue(std::move(task), std::move(warnings));
}

std::string JobService::submit(std::string_view qids, std::string_view pids, std::string_view options_json) {
    const auto check_size = [&](std::string_view what, std::string_view content) {
        if (content.size() > config_.max_upload_bytes)
            throw SubmissionError(ErrorKind::PayloadTooLarge, std::string(what) + " exceeds " +
                                                                  std::to_string(config_.max_upload_bytes) + " bytes");
    };
    check_size("qids", qids);
    check_size("pids", pids);
    check_size("options", options_json);

    const auto q = parse_qid_lines(qids);
    const auto p = parse_pid_lines(pids);
    std::vector<InputLineError> lines;
    for (const auto& e : q.errors) lines.push_back({"qids", e});
    for (const auto& e : p.errors) lines.push_back({"pids", e});
    if (!lines.empty()) {
        std::string message = describe("qids", q.errors);
        const std::string pid_errors = describe("pids", p.errors);
        if (!message.empty() && !pid_errors.empty()) message += "\n";
        throw SubmissionError(ErrorKind::ValidationError, message + pid_errors, std::move(lines));
    }
    if (q.values.empty()) throw SubmissionError(ErrorKind::ValidationError, "qids file lists no entity");
    if (p.values.empty()) throw SubmissionError(ErrorKind::ValidationError, "pids file lists no property");

    ExtractionTask task = config_.defaults;
    task.seeds = q.values;
    task.properties = p.values;
    apply_options(task, options_json);
    return submit_task(std::move(task));
}

std::string JobService::resubmit_with_seeds(const std::string& id, std::span<const std::string> extra_seeds) {
    ExtractionTask task;
    {
        std::lock_guard lock(mutex_);
        task = find(id).info.task;
    }
    std::vector<InputLineError> lines;
    for (std::size_t i = 0; i < extra_seeds.size(); ++i) {
        try {
            task.seeds.push_back(parse_entity_id(extra_seeds[i]));
        } catch (const Error& e) {
            lines.push_back({"extra_seeds", LineError{i + 1, extra_seeds[i], e.what()}});
        }
    }
    if (!lines.empty()) {
        std::vector<LineError> plain;
        for (const auto& l : lines) plain.push_back(l.error);
        throw SubmissionError(ErrorKind::ValidationError, describe("extra_seeds", plain), std::move(lines));
    }
    return submit_task(std::move(task));
}

JobService::Job& JobService::find(const std::string& id) {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) fail(ErrorKind::UnknownJob, "no job with id '" + id + "'");
    return it->second;
}

void JobService::expire_if_due(Job& job, Clock::time_point now) {
    JobInfo& info = job.info;
    if (info.expired || !info.finished_at || now - *info.finished_at <= config_.retention) return;
    info.expired = true;
    std::error_code ec;
    std::filesystem::remove(result_path(info.id, "json"), ec);
    std::filesystem::remove(result_path(info.id, "nt"), ec);
    append_log(json{{"event", "expired"}, {"id", info.id}, {"at", millis(now)}}.dump());
}

JobInfo JobService::status(const std::string& id) {
    std::lock_guard lock(mutex_);
    Job& job = find(id);
    expire_if_due(job, Clock::now());
    return job.info;
}

JobPage JobService::list(std::size_t page, std::size_t page_size) {
    if (page_size == 0) page_size = 20;
    std::lock_guard lock(mutex_);
    std::vector<const JobInfo*> all;
    for (auto& [id, job] : jobs_) all.push_back(&job.info);
    std::sort(all.begin(), all.end(), [](const JobInfo* a, const JobInfo* b) { return a->sequence > b->sequence; });
    JobPage out;
    out.total = all.size();
    out.page = page;
    out.page_size = page_size;
    const std::size_t first = page * page_size;   // page is 0-based
    for (std::size_t i = first; i < all.size() && i < first + page_size; ++i) out.jobs.push_back(*all[i]);
    return out;
}

std::string JobService::result(const std::string& id, std::string_view format) {
    if (format != "json" && format != "nt")
        fail(ErrorKind::UnsupportedFormat, "unsupported format '" + std::string(format) + "' (use json or nt)");
    std::filesystem::path path;
    {
        std::lock_guard lock(mutex_);
        Job& job = find(id);
        expire_if_due(job, Clock::now());
        switch (job.info.state) {
            case JobState::Pending:
            case JobState::Running:
                fail(ErrorKind::NotReady, "job " + id + " is " + std::string(to_string(job.info.state)));
            case JobState::Failed:
                fail(ErrorKind::JobFailed, job.info.error.value_or("job failed"));
            case JobState::Done:
                break;
        }
        if (job.info.expired) fail(ErrorKind::Gone, "results of job " + id + " have expired");
        path = result_path(id, format);
    }
    return read_file(path);
}

void JobService::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

void JobService::worker_loop() {
    for (;;) {
        std::string id;
        ExtractionTask task;
        {
            std::unique_lock lock(mutex_);
            work_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
            ++running_;
            JobInfo& info = jobs_.at(id).info;
            info.state = JobState::Running;
            info.started_at = Clock::now();
            task = info.task;
            append_log(json{{"event", "started"}, {"id", id}, {"at", millis(*info.started_at)}}.dump());
        }

        std::optional<std::string> error;
        try {
            const ExtractionResult result = executor_(task, [this, &id](const Progress& p) {
                std::lock_guard lock(mutex_);
                jobs_.at(id).info.progress = p;
            });
            write_file_atomic(result_path(id, "json"), to_json(result));
            write_file_atomic(result_path(id, "nt"), to_ntriples(result));
        } catch (const Error& e) {
            error = std::string(to_string(e.kind())) + ": " + e.what();
        } catch (const std::exception& e) {
            error = std::string("internal error: ") + e.what();
        }

        {
            std::lock_guard lock(mutex_);
            JobInfo& info = jobs_.at(id).info;
            info.finished_at = std::max(Clock::now(), *info.started_at);
            info.state = error ? JobState::Failed : JobState::Done;
            info.error = error;
            json event{{"event", error ? "failed" : "done"}, {"id", id}, {"at", millis(*info.finished_at)}};
            if (error) event["error"] = *error;
            append_log(event.dump());
            --running_;
        }
        idle_cv_.notify_all();
    }
}

std::string job_json(const JobInfo& info) {
    json j = {{"id", info.id},
              {"state", to_string(info.state)},
              {"submitted_at", iso8601(info.submitted_at)},
              {"task", task_json(info.task)},
              {"warnings", info.warnings},
              {"progress", {{"visited", info.progress.visited}, {"depth", info.progress.depth}}},
              {"result_available", info.state == JobState::Done && !info.expired}};
    if (info.started_at) j["started_at"] = iso8601(*info.started_at);
    if (info.finished_at) j["finished_at"] = iso8601(*info.finished_at);
    if (info.error) j["error"] = *info.error;
    return j.dump();
}

std::string page_json(const JobPage& page) {
    json jobs = json::array();
    for (const auto& info : page.jobs) jobs.push_back(json::parse(job_json(info)));
    return json{{"jobs", jobs}, {"total", page.total}, {"page", page.page}, {"page_size", page.page_size}}.dump();
}

int http_status(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ValidationError:
        case ErrorKind::MalformedId:
        case ErrorKind::UnsupportedFormat:
        case ErrorKind::SchemaError: return 400;
        case ErrorKind::UnknownJob: return 404;
        case ErrorKind::NotReady: return 409;
        case ErrorKind::Gone: return 410;
        case ErrorKind::PayloadTooLarge: return 413;
        case ErrorKind::JobFailed: return 422;
        default: return 500;
    }
}

}  // namespace kgp
