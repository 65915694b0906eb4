#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "kgprune/error.hpp"
#include "kgprune/export.hpp"
#include "kgprune/service.hpp"
#include "support/temp_dir.hpp"

using namespace kgp;
using namespace std::chrono_literals;

namespace {

const std::filesystem::path kExample = std::filesystem::path(KGP_DATA_DIR) / "example";

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const AdjacencySnapshot& mini_snapshot() {
    static const AdjacencySnapshot snap = [] {
        std::ifstream in(kExample / "mini_snapshot.nt");
        return read_snapshot(in).snapshot;
    }();
    return snap;
}

ExtractionResult snapshot_executor(const ExtractionTask& task, const ProgressFn& progress) {
    SnapshotSource source(mini_snapshot());
    return extract(task, source, nullptr, progress);
}

ServiceConfig config_in(const testing::TempDir& dir, unsigned workers = 2) {
    ServiceConfig c;
    c.data_dir = dir.path();
    c.workers = workers;
    c.defaults.mode = ClassifierMode::KeepAll;
    return c;
}

// Holds every execution until opened.
class Gate {
public:
    void open() {
        {
            std::lock_guard lock(m_);
            open_ = true;
        }
        cv_.notify_all();
    }
    void pass() {
        std::unique_lock lock(m_);
        ++waiting_;
        cv_.notify_all();
        cv_.wait(lock, [this] { return open_; });
    }
    void wait_for_waiters(int n) {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] { return waiting_ >= n; });
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    bool open_ = false;
    int waiting_ = 0;
};

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::IoError;
}

int rank(JobState s) {
    return s == JobState::Pending ? 0 : s == JobState::Running ? 1 : 2;
}

}  // namespace

TEST_CASE("submission") {
    testing::TempDir dir;
    Gate gate;
    JobService service(config_in(dir, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
        gate.pass();
        return snapshot_executor(t, p);
    });

    SUBCASE("example inputs give a pending job echoing the parsed task") {
        const auto blocker = service.submit("Q1\n", "P31\n");
        gate.wait_for_waiters(1);
        const auto id = service.submit(slurp(kExample / "qid_example.csv"), slurp(kExample / "pid_example.csv"));
        const auto info = service.status(id);
        CHECK(info.state == JobState::Pending);
        CHECK(info.task.seeds == std::vector<EntityId>{EntityId{18833}, EntityId{251}});
        CHECK(info.task.properties == std::vector<PropertySpec>{{31, Direction::Direct}, {279, Direction::Direct},
                                                                {279, Direction::Inverse}, {361, Direction::Direct}});
        CHECK(kind_of([&] { service.result(id, "json"); }) == ErrorKind::NotReady);
        CHECK(service.status(blocker).state == JobState::Running);
    }
    SUBCASE("empty pids") {
        CHECK(kind_of([&] { service.submit("Q1\n", "\n\n"); }) == ErrorKind::ValidationError);
    }
    SUBCASE("a property id in the qids file") {
        try {
            service.submit("Q1\nP31\nQ3\n", "P31\n");
            FAIL("accepted");
        } catch (const SubmissionError& e) {
            CHECK(e.kind() == ErrorKind::ValidationError);
            REQUIRE(e.lines().size() == 1);
            CHECK(e.lines()[0].file == "qids");
            CHECK(e.lines()[0].error.line == 2);
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("every malformed line is reported") {
        try {
            service.submit("Q1\nfoo\n", "P31\n(+)P2\nQ4\n");
            FAIL("accepted");
        } catch (const SubmissionError& e) {
            CHECK(e.lines().size() == 3);
        }
    }
    SUBCASE("size cap") {
        std::string big;
        while (big.size() <= (1u << 20)) big += "Q12345\n";
        CHECK(kind_of([&] { service.submit(big, "P31\n"); }) == ErrorKind::PayloadTooLarge);
    }
    SUBCASE("options") {
        const auto id = service.submit("Q1\n", "P31\n", R"({"max_depth": 2, "tau": 0.7, "mode": "whitelist", "whitelist": ["Q5"]})");
        const auto task = service.status(id).task;
        CHECK(task.max_depth == 2u);
        CHECK(task.tau == 0.7);
        CHECK(task.mode == ClassifierMode::Whitelist);
        CHECK(task.whitelist == std::set<EntityId>{EntityId{5}});
        CHECK(kind_of([&] { service.submit("Q1\n", "P31\n", R"({"colour": 1})"); }) == ErrorKind::ValidationError);
        CHECK(kind_of([&] { service.submit("Q1\n", "P31\n", R"({"tau": 1.5})"); }) == ErrorKind::ValidationError);
        CHECK(kind_of([&] { service.submit("Q1\n", "P31\n", R"([1])"); }) == ErrorKind::ValidationError);
    }
    SUBCASE("analogy mode needs references") {
        CHECK(kind_of([&] { service.submit("Q1\n", "P31\n", R"({"mode": "analogy"})"); }) == ErrorKind::ValidationError);
    }
    gate.open();
}

TEST_CASE("status, results and listing") {
    testing::TempDir dir;
    std::atomic<bool> fail_next{false};
    JobService service(config_in(dir, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
        if (fail_next.exchange(false)) throw Error(ErrorKind::TransportError, "endpoint unreachable");
        return snapshot_executor(t, p);
    });

    CHECK(service.list(0).jobs.empty());
    CHECK(service.list(0).total == 0);
    CHECK(kind_of([&] { service.status("0123456789abcdef"); }) == ErrorKind::UnknownJob);

    const auto id = service.submit(slurp(kExample / "qid_example.csv"), slurp(kExample / "pid_example.csv"));
    service.wait_idle();
    const auto info = service.status(id);
    CHECK(info.state == JobState::Done);
    REQUIRE(info.started_at);
    REQUIRE(info.finished_at);
    CHECK(info.submitted_at <= *info.started_at);
    CHECK(*info.started_at <= *info.finished_at);
    CHECK(info.progress.visited > 0);

    const auto doc = parse_json(service.result(id, "json"));
    CHECK(doc.seeds == std::vector<EntityId>{EntityId{18833}, EntityId{251}});
    CHECK_FALSE(service.result(id, "nt").empty());
    CHECK(kind_of([&] { service.result(id, "xml"); }) == ErrorKind::UnsupportedFormat);
    CHECK(kind_of([&] { service.result("ffffffffffffffff", "json"); }) == ErrorKind::UnknownJob);

    fail_next = true;
    const auto failed = service.submit("Q1\n", "P31\n");
    service.wait_idle();
    CHECK(service.status(failed).state == JobState::Failed);
    try {
        service.result(failed, "json");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::JobFailed);
        CHECK(std::string(e.what()).find("endpoint unreachable") != std::string::npos);
    }

    const auto third = service.submit("Q2\n", "P31\n");
    service.wait_idle();
    const auto page = service.list(0, 20);
    REQUIRE(page.jobs.size() == 3);
    CHECK(page.jobs[0].id == third);
    CHECK(page.jobs[1].id == failed);
    CHECK(page.jobs[2].id == id);
    const auto second_page = service.list(1, 2);
    CHECK(second_page.jobs.size() == 1);
    const auto beyond = service.list(7, 2);
    CHECK(beyond.jobs.empty());
    CHECK(beyond.total == 3);
}

TEST_CASE("resubmission with extra seeds") {
    testing::TempDir dir;
    JobService service(config_in(dir), snapshot_executor);
    const auto id = service.submit("Q1\n", "P31\n");

    const auto more = service.resubmit_with_seeds(id, std::vector<std::string>{"Q2"});
    CHECK(more != id);
    CHECK(service.status(more).task.seeds == std::vector<EntityId>{EntityId{1}, EntityId{2}});
    CHECK(service.status(id).task.seeds == std::vector<EntityId>{EntityId{1}});

    const auto same = service.resubmit_with_seeds(id, std::vector<std::string>{"Q1"});
    CHECK(same != id);
    CHECK(service.status(same).task.seeds == std::vector<EntityId>{EntityId{1}});
    CHECK(service.status(same).warnings.size() == 1);

    const auto before = service.list(0).total;
    CHECK(kind_of([&] { service.resubmit_with_seeds(id, std::vector<std::string>{"Q2", "X9"}); }) ==
          ErrorKind::ValidationError);
    CHECK(service.list(0).total == before);
    CHECK(kind_of([&] { service.resubmit_with_seeds("00", std::vector<std::string>{"Q2"}); }) == ErrorKind::UnknownJob);
}

TEST_CASE("concurrent submissions run exactly once") {
    testing::TempDir dir;
    std::mutex m;
    std::map<EntityId, int> runs;
    {
        JobService service(config_in(dir, 4), [&](const ExtractionTask& t, const ProgressFn& p) {
            {
                std::lock_guard lock(m);
                ++runs[t.seeds.front()];
            }
            return snapshot_executor(t, p);
        });
        std::vector<std::thread> clients;
        for (int c = 0; c < 10; ++c)
            clients.emplace_back([&, c] {
                for (int i = 0; i < 5; ++i) service.submit("Q" + std::to_string(1000 + c * 5 + i) + "\n", "P31\n");
            });
        for (auto& t : clients) t.join();
        service.wait_idle();
        CHECK(service.list(0, 100).total == 50);
        for (const auto& info : service.list(0, 100).jobs) CHECK(info.state == JobState::Done);
    }
    CHECK(runs.size() == 50);
    for (const auto& [seed, n] : runs) CHECK(n == 1);
}

TEST_CASE("single worker starts jobs in submission order") {
    testing::TempDir dir;
    std::vector<EntityId> order;
    Gate gate;
    JobService service(config_in(dir, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
        gate.pass();
        order.push_back(t.seeds.front());
        return snapshot_executor(t, p);
    });
    std::vector<EntityId> expected;
    for (std::uint64_t q = 1; q <= 8; ++q) {
        service.submit("Q" + std::to_string(q) + "\n", "P31\n");
        expected.push_back(EntityId{q});
    }
    gate.open();
    service.wait_idle();
    CHECK(order == expected);
}

TEST_CASE("restart keeps queued work") {
    testing::TempDir dir, crash_image;
    std::vector<std::string> ids;
    {
        Gate gate;
        JobService service(config_in(dir, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
            gate.pass();
            return snapshot_executor(t, p);
        });
        for (int i = 1; i <= 5; ++i) ids.push_back(service.submit("Q" + std::to_string(i) + "\n", "P31\n"));
        gate.wait_for_waiters(1);
        // One job running, four pending: snapshot the data directory as a crash would leave it.
        std::filesystem::copy(dir.path(), crash_image.path(), std::filesystem::copy_options::recursive |
                                                                  std::filesystem::copy_options::overwrite_existing);
        gate.open();
    }

    std::atomic<int> executions{0};
    JobService revived(config_in(crash_image, 2), [&](const ExtractionTask& t, const ProgressFn& p) {
        ++executions;
        return snapshot_executor(t, p);
    });
    revived.wait_idle();
    CHECK(executions == 5);
    for (const auto& id : ids) {
        CHECK(revived.status(id).state == JobState::Done);
        CHECK_NOTHROW(parse_json(revived.result(id, "json")));
    }

    SUBCASE("finished jobs are not rerun") {
        revived.shutdown();
        std::atomic<int> again{0};
        JobService third(config_in(crash_image, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
            ++again;
            return snapshot_executor(t, p);
        });
        third.wait_idle();
        CHECK(again == 0);
        CHECK(third.list(0).total == 5);
    }
}

TEST_CASE("graceful shutdown keeps pending jobs") {
    testing::TempDir dir;
    std::vector<std::string> ids;
    {
        Gate gate;
        JobService service(config_in(dir, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
            gate.pass();
            return snapshot_executor(t, p);
        });
        for (int i = 1; i <= 4; ++i) ids.push_back(service.submit("Q" + std::to_string(i) + "\n", "P31\n"));
        gate.wait_for_waiters(1);
        gate.open();
        service.shutdown();
    }
    JobService revived(config_in(dir, 1), snapshot_executor);
    revived.wait_idle();
    for (const auto& id : ids) CHECK(revived.status(id).state == JobState::Done);
}

TEST_CASE("expired results are gone") {
    testing::TempDir dir;
    auto config = config_in(dir, 1);
    config.retention = 0s;
    JobService service(config, snapshot_executor);
    const auto id = service.submit("Q1\n", "P31\n");
    service.wait_idle();
    std::this_thread::sleep_for(5ms);
    CHECK(kind_of([&] { service.result(id, "json"); }) == ErrorKind::Gone);
    CHECK(service.status(id).state == JobState::Done);
    CHECK_FALSE(std::filesystem::exists(dir / "results" / (id + ".json")));
}

TEST_CASE("job states never regress") {
    std::mt19937_64 rng(5);
    for (int trace = 0; trace < 5; ++trace) {
        testing::TempDir dir;
        std::vector<int> delays, failures;
        for (int i = 0; i < 20; ++i) {
            delays.push_back(static_cast<int>(rng() % 3));
            failures.push_back(rng() % 4 == 0);
        }
        JobService service(config_in(dir, 1 + trace % 3), [&](const ExtractionTask& t, const ProgressFn& p) {
            const auto i = t.seeds.front().value - 1;
            std::this_thread::sleep_for(std::chrono::milliseconds(delays[i]));
            if (failures[i]) throw Error(ErrorKind::TransportError, "injected");
            return snapshot_executor(t, p);
        });
        std::vector<std::string> ids;
        std::map<std::string, std::vector<JobState>> seen;
        std::atomic<bool> done{false};
        std::mutex ids_mutex;
        std::thread poller([&] {
            while (!done) {
                std::vector<std::string> snapshot;
                {
                    std::lock_guard lock(ids_mutex);
                    snapshot = ids;
                }
                for (const auto& id : snapshot) seen[id].push_back(service.status(id).state);
                std::this_thread::sleep_for(200us);
            }
        });
        for (int i = 1; i <= 20; ++i) {
            const auto id = service.submit("Q" + std::to_string(i) + "\n", "P31\n");
            std::lock_guard lock(ids_mutex);
            ids.push_back(id);
        }
        service.wait_idle();
        done = true;
        poller.join();
        for (const auto& id : ids) seen[id].push_back(service.status(id).state);
        for (const auto& [id, states] : seen) {
            for (std::size_t i = 1; i < states.size(); ++i) {
                CHECK(rank(states[i - 1]) <= rank(states[i]));
                if (rank(states[i - 1]) == 2) CHECK(states[i - 1] == states[i]);
            }
            const auto i = service.status(id).task.seeds.front().value - 1;
            CHECK(states.back() == (failures[i] ? JobState::Failed : JobState::Done));
        }
    }
}

TEST_CASE("HTTP API") {
    testing::TempDir dir, web;
    std::ofstream(web / "index.html") << "<html>bundle</html>";
    std::ofstream(web / "app.js") << "console.log(1)";
    JobService service(config_in(dir, 2), snapshot_executor);
    HttpApi api(service, web.path());
    const int port = api.bind("127.0.0.1", 0);
    api.start();
    httplib::Client client("127.0.0.1", port);

    const auto post_job = [&](const std::string& qids, const std::string& pids, const std::string& options = "") {
        httplib::MultipartFormDataItems items{{"qids", qids, "qid_example.csv", "text/csv"},
                                              {"pids", pids, "pid_example.csv", "text/csv"}};
        if (!options.empty()) items.push_back({"options", options, "", "application/json"});
        return client.Post("/api/jobs", items);
    };

    auto res = post_job(slurp(kExample / "qid_example.csv"), slurp(kExample / "pid_example.csv"));
    REQUIRE(res);
    CHECK(res->status == 202);
    const std::string id = nlohmann::json::parse(res->body)["job_id"];

    service.wait_idle();
    res = client.Get("/api/jobs/" + id);
    REQUIRE(res);
    CHECK(res->status == 200);
    auto status = nlohmann::json::parse(res->body);
    CHECK(status["state"] == "done");
    CHECK(status["task"]["seeds"] == nlohmann::json::array({"Q18833", "Q251"}));

    res = client.Get("/api/jobs/" + id + "/result?format=json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/json");
    CHECK(parse_json(res->body).seeds.size() == 2);
    res = client.Get("/api/jobs/" + id + "/result?format=nt");
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type").starts_with("application/n-triples"));
    CHECK(res->body == service.result(id, "nt"));
    res = client.Get("/api/jobs/" + id + "/result?format=xml");
    CHECK(res->status == 400);
    CHECK(nlohmann::json::parse(res->body)["error"] == "UnsupportedFormat");

    CHECK(client.Get("/api/jobs/00000000000000ff")->status == 404);
    CHECK(client.Get("/api/jobs/00000000000000ff/result")->status == 404);

    res = post_job("Q1\nP31\n", "P31\n");
    CHECK(res->status == 400);
    auto err = nlohmann::json::parse(res->body);
    CHECK(err["error"] == "ValidationError");
    CHECK(err["lines"][0]["line"] == 2);
    CHECK(err["lines"][0]["file"] == "qids");
    CHECK(post_job("Q1\n", "")->status == 400);

    std::string big;
    while (big.size() <= (1u << 20)) big += "Q12345\n";
    CHECK(post_job(big, "P31\n")->status == 413);

    res = client.Post("/api/jobs/" + id + "/resubmit", R"({"extra_seeds": ["Q5000"]})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 202);
    const std::string again = nlohmann::json::parse(res->body)["job_id"];
    CHECK(service.status(again).task.seeds.back() == EntityId{5000});
    CHECK(client.Post("/api/jobs/" + id + "/resubmit", R"({"extra_seeds": ["nope"]})", "application/json")->status == 400);
    CHECK(client.Post("/api/jobs/" + id + "/resubmit", "[]", "application/json")->status == 400);

    res = client.Get("/api/jobs?page=0&page_size=10");
    REQUIRE(res);
    const auto page = nlohmann::json::parse(res->body);
    CHECK(page["total"] == 2);
    CHECK(page["jobs"][0]["id"] == again);

    CHECK(client.Get("/")->body == "<html>bundle</html>");
    CHECK(client.Get("/app.js")->body == "console.log(1)");
    api.stop();
}

TEST_CASE("HTTP: pending results are not ready") {
    testing::TempDir dir;
    Gate gate;
    JobService service(config_in(dir, 1), [&](const ExtractionTask& t, const ProgressFn& p) {
        gate.pass();
        return snapshot_executor(t, p);
    });
    HttpApi api(service);
    const int port = api.bind("127.0.0.1", 0);
    api.start();
    httplib::Client client("127.0.0.1", port);
    const auto id = service.submit("Q1\n", "P31\n");
    const auto res = client.Get("/api/jobs/" + id + "/result");
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(client.Get("/")->body.find("/api/jobs") != std::string::npos);
    gate.open();
    api.stop();
}
