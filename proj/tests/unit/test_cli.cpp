#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "kgprune/analogy.hpp"
#include "kgprune/cli.hpp"
#include "kgprune/export.hpp"
#include "kgprune/ingest.hpp"
#include "kgprune/runtime.hpp"
#include "kgprune/service.hpp"
#include "kgprune/task_input.hpp"
#include "support/stub_endpoint.hpp"
#include "support/temp_dir.hpp"
#include "support/toy_kg.hpp"

using namespace kgp;
namespace fs = std::filesystem;

namespace {

const fs::path kData = KGP_DATA_DIR;
const fs::path kFixtures = KGP_FIXTURE_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "kgprune");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::string> example_extract(const fs::path& out) {
    return {"extract",
            "--qids", (kData / "example/qid_example.csv").string(),
            "--pids", (kData / "example/pid_example.csv").string(),
            "--snapshot", (kData / "example/mini_snapshot.nt").string(),
            "--out", out.string()};
}

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
}

std::vector<std::string> analogy_flags() {
    return {"--model", (kData / "example/mini_model.kgpm").string(),
            "--embeddings", (kData / "example/mini_embeddings.kgpe").string(),
            "--references", (kData / "example/references.csv").string(), "--k", "5"};
}

}  // namespace

TEST_CASE("extract the example seeds in keep-all mode") {
    testing::TempDir dir;
    const auto r = run(with(example_extract(dir.path()), {"--mode", "keep-all"}));
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("wall time") != std::string::npos);
    const auto doc = parse_json(slurp(dir / "result.json"));
    std::map<EntityId, NodeDecision> decisions;
    for (const auto& n : doc.nodes) decisions[n.id] = n.decision;
    CHECK(decisions.at(EntityId{18833}) == NodeDecision::Seed);
    CHECK(decisions.at(EntityId{251}) == NodeDecision::Seed);
    CHECK(doc.seeds == std::vector<EntityId>{EntityId{18833}, EntityId{251}});
    CHECK(fs::exists(dir / "result.nt"));
}

TEST_CASE("usage errors exit 1") {
    testing::TempDir dir;
    SUBCASE("missing --pids") {
        const auto r = run({"extract", "--qids", (kData / "example/qid_example.csv").string(), "--snapshot",
                            (kData / "example/mini_snapshot.nt").string(), "--out", dir.path().string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("--pids") != std::string::npos);
        CHECK(r.err.find("kgprune extract --help") != std::string::npos);
    }
    SUBCASE("no subcommand") {
        CHECK(run({}).code == 1);
    }
    SUBCASE("malformed seed file names the line") {
        write(dir / "bad.csv", "Q1\nP31\n");
        const auto r = run({"extract", "--qids", (dir / "bad.csv").string(), "--pids",
                            (kData / "example/pid_example.csv").string(), "--snapshot",
                            (kData / "example/mini_snapshot.nt").string(), "--out", (dir / "o").string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("qids line 2") != std::string::npos);
    }
    SUBCASE("analogy mode without a model") {
        const auto r = run(example_extract(dir / "o"));
        CHECK(r.code == 1);
        CHECK(r.err.find("--model") != std::string::npos);
    }
    SUBCASE("no source") {
        const auto r = run({"extract", "--qids", (kData / "example/qid_example.csv").string(), "--pids",
                            (kData / "example/pid_example.csv").string(), "--out", (dir / "o").string()});
        CHECK(r.code == 1);
    }
    SUBCASE("help is not an error") {
        const auto r = run({"extract", "--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("--degree-cap") != std::string::npos);
    }
}

TEST_CASE("runtime errors exit 2") {
    testing::TempDir dir;
    write(dir / "broken.kgpm", "not a model\n");
    const auto r = run(with(example_extract(dir / "o"),
                            {"--model", (dir / "broken.kgpm").string(), "--embeddings",
                             (kData / "example/mini_embeddings.kgpe").string(), "--references",
                             (kData / "example/references.csv").string()}));
    CHECK(r.code == 2);
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("nt output with no kept edges is an empty file") {
    testing::TempDir dir;
    write(dir / "whitelist.csv", "Q99999\n");
    const auto r = run(with(example_extract(dir / "o"),
                            {"--mode", "whitelist", "--whitelist", (dir / "whitelist.csv").string(), "--format", "nt"}));
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "o/result.nt"));
    CHECK(fs::file_size(dir / "o/result.nt") == 0);
    CHECK_FALSE(fs::exists(dir / "o/result.json"));
}

TEST_CASE("ten repeated extractions are byte-identical") {
    testing::TempDir dir;
    for (const bool analogy : {false, true}) {
        CAPTURE(analogy);
        std::string json0, nt0;
        for (int i = 0; i < 10; ++i) {
            const fs::path out = dir / ("run" + std::to_string(analogy) + "-" + std::to_string(i));
            auto args = with(example_extract(out), {"--seed", "42"});
            if (analogy) for (const auto& a : analogy_flags()) args.push_back(a);
            else args.insert(args.end(), {"--mode", "keep-all"});
            const auto r = run(args);
            INFO(r.err);
            REQUIRE(r.code == 0);
            const auto json = slurp(out / "result.json");
            const auto nt = slurp(out / "result.nt");
            if (i == 0) {
                json0 = json;
                nt0 = nt;
                CHECK_FALSE(json.empty());
            }
            CHECK(json == json0);
            CHECK(nt == nt0);
        }
    }
}

TEST_CASE("cli and service produce the same document") {
    testing::TempDir dir;
    const auto r = run(with(example_extract(dir / "cli"), analogy_flags()));
    INFO(r.err);
    REQUIRE(r.code == 0);

    Runtime rt;
    rt.snapshot = std::make_shared<const AdjacencySnapshot>(load_dump(kData / "example/mini_snapshot.nt").snapshot);
    rt.analogy = std::make_shared<const AnalogyBundle>(load_analogy(
        kData / "example/mini_model.kgpm", kData / "example/mini_embeddings.kgpe", kData / "example/references.csv"));
    ServiceConfig config;
    config.data_dir = dir / "service";
    config.workers = 1;
    config.reference_count = rt.analogy->references.size();
    JobService service(config, make_executor(rt));
    const auto id = service.submit(slurp(kData / "example/qid_example.csv"), slurp(kData / "example/pid_example.csv"),
                                   R"({"k": 5})");
    service.wait_idle();
    CHECK(service.result(id, "json") == slurp(dir / "cli/result.json"));
    CHECK(service.result(id, "nt") == slurp(dir / "cli/result.nt"));
}

TEST_CASE("snapshot mode makes no network requests") {
    testing::StubEndpoint stub(kFixtures / "entitydata", kData / "example/mini_snapshot.nt");
    ::setenv("KGP_ENDPOINT", stub.base_url().c_str(), 1);
    ::setenv("KGP_SPARQL_ENDPOINT", stub.sparql_url().c_str(), 1);
    testing::TempDir dir;
    const auto r = run(with(example_extract(dir / "o"), {"--mode", "keep-all"}));
    CHECK(r.code == 0);
    CHECK(stub.request_count() == 0);

    SUBCASE("while --endpoint reaches the same result live") {
        const auto live = run({"extract", "--qids", (kData / "example/qid_example.csv").string(), "--pids",
                               (kData / "example/pid_example.csv").string(), "--endpoint", stub.base_url(),
                               "--sparql-endpoint", stub.sparql_url(), "--mode", "keep-all", "--format", "json",
                               "--out", (dir / "live").string()});
        INFO(live.err);
        REQUIRE(live.code == 0);
        CHECK(stub.request_count() > 0);
        const auto a = parse_json(slurp(dir / "o/result.json"));
        const auto b = parse_json(slurp(dir / "live/result.json"));
        CHECK(a.edges == b.edges);
        CHECK(a.nodes.size() == b.nodes.size());
    }
    ::unsetenv("KGP_ENDPOINT");
    ::unsetenv("KGP_SPARQL_ENDPOINT");
}

TEST_CASE("evaluate the hand-labelled predictions") {
    testing::TempDir dir;
    const auto r = run({"evaluate", "--predictions", (kData / "eval/hand_labeled_10.csv").string(), "--report",
                        (dir / "metrics.json").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    // Probabilities above 0.5 are positive: tp = 0.9, 0.8, 0.55; fp = 0.7, 0.6;
    // fn = 0.4, 0.5, 0.1; tn = 0.3, 0.2.
    const auto m = nlohmann::json::parse(slurp(dir / "metrics.json"));
    CHECK(m["confusion"]["tp"] == 3);
    CHECK(m["confusion"]["fp"] == 2);
    CHECK(m["confusion"]["tn"] == 2);
    CHECK(m["confusion"]["fn"] == 3);
    CHECK(m["precision"].get<double>() == 3.0 / 5.0);
    CHECK(m["recall"].get<double>() == 3.0 / 6.0);
    CHECK(m["f1"].get<double>() == doctest::Approx(6.0 / 11.0).epsilon(1e-15));
    CHECK(m["accuracy"].get<double>() == 5.0 / 10.0);
    CHECK(m["parameters"].is_null());
    CHECK(r.out.find("precision  0.6000") != std::string::npos);
    CHECK(r.out.find("f1         0.5455") != std::string::npos);

    SUBCASE("model route reports the parameter count") {
        const auto e = run({"evaluate", "--model", (kData / "example/mini_model.kgpm").string(), "--embeddings",
                            (kData / "example/mini_embeddings.kgpe").string(), "--decisions",
                            (kData / "example/references.csv").string(), "--report", (dir / "model.json").string()});
        REQUIRE(e.code == 0);
        const auto mm = nlohmann::json::parse(slurp(dir / "model.json"));
        CHECK(mm["parameters"] == load_model(kData / "example/mini_model.kgpm").param_count());
    }
    SUBCASE("bad probability") {
        write(dir / "bad.csv", "probability,label\n1.5,valid\n");
        CHECK(run({"evaluate", "--predictions", (dir / "bad.csv").string()}).code == 2);
    }
}

TEST_CASE("train-model with zero epochs reports the initial loss only") {
    testing::TempDir dir;
    const auto r = run({"train-model", "--decisions", (kData / "example/references.csv").string(), "--embeddings",
                        (kData / "example/mini_embeddings.kgpe").string(), "--out", (dir / "m.kgpm").string(),
                        "--epochs", "0", "--n1", "3", "--n2", "2", "--seed", "5", "--report",
                        (dir / "report.json").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK_FALSE(report.contains("final_loss"));
    CHECK_FALSE(report.contains("epoch_losses"));

    // Independent recomputation: the seeded initial model scored on the same quadruples.
    const auto table = load_embeddings(kData / "example/mini_embeddings.kgpe");
    const auto data = load_decision_csv(kData / "example/references.csv");
    const auto set = build_training_quadruples(data.examples, table, 5);
    const auto init = AnalogyModel::random(ModelShape{table.dimension(), 3, 2, 1}, 5);
    CHECK(report["initial_loss"].get<double>() == doctest::Approx(mean_loss(init, set.items)).epsilon(1e-12));
    CHECK(load_model(dir / "m.kgpm") == init);
}

TEST_CASE("train-embeddings on the toy chain") {
    testing::TempDir dir;
    const auto r = run({"train-embeddings", "--triples", (kData / "toy/toy_chain.nt").string(), "--out",
                        (dir / "toy.kgpe").string(), "--dim", "50", "--epochs", "500", "--batch", "10", "--seed",
                        "1", "--report", (dir / "report.json").string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(report["tail_ranking"]["hit_ratio"].get<double>() >= 0.80);
    const auto table = load_embeddings(dir / "toy.kgpe");
    const double oracle = testing::filtered_tail_hits(table, testing::toy_chain_kg(), 10);
    CHECK(oracle >= 0.80);
    CHECK(report["tail_ranking"]["hit_ratio"].get<double>() == doctest::Approx(oracle));
}

TEST_CASE("param-search always succeeds") {
    testing::TempDir dir;
    const auto r = run({"param-search", "--target", "10", "--dims", "2", "--strides", "1", "--max-filters", "2",
                        "--report", (dir / "s.json").string()});
    REQUIRE(r.code == 0);
    // 3 n1 + n2 (4 n1 + 1) + n2 ((d - 2) / s + 1) + 1 with d = 2: only n1 = n2 = 1 gives 10.
    const auto s = nlohmann::json::parse(slurp(dir / "s.json"));
    REQUIRE(s["matches"]["10"].size() == 1);
    CHECK(s["matches"]["10"][0]["conv1_filters"] == 1);
    CHECK(run({"param-search", "--target", "3", "--dims", "10"}).out.find("no configuration") != std::string::npos);
}
