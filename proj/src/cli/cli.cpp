#include "kgprune/cli.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <pthread.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgprune/analogy.hpp"
#include "kgprune/error.hpp"
#include "kgprune/export.hpp"
#include "kgprune/ingest.hpp"
#include "kgprune/runtime.hpp"
#include "kgprune/service.hpp"
#include "kgprune/task_input.hpp"
#include "kgprune/transe.hpp"

namespace kgp {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ValidationError:
        case ErrorKind::MalformedId:
        case ErrorKind::SeedUnembedded:
        case ErrorKind::UnsupportedFormat: return kUsage;
        default: return kRuntime;
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::shared_ptr<const AdjacencySnapshot> load_snapshot_file(const fs::path& path, std::ostream& err) {
    auto loaded = load_dump(path);
    if (loaded.skipped_lines > 0)
        err << "warning: " << path.string() << ": skipped " << loaded.skipped_lines << " unparseable line(s)\n";
    for (const auto& w : loaded.warnings)
        if (w.starts_with("EmptySnapshot")) err << "warning: " << w << "\n";
    return std::make_shared<const AdjacencySnapshot>(std::move(loaded.snapshot));
}

template <typename T>
std::vector<T> parsed_or_throw(const ParsedLines<T>& parsed, const char* label) {
    if (!parsed.ok()) fail(ErrorKind::ValidationError, describe(label, parsed.errors));
    return parsed.values;
}

struct ExtractFlags {
    fs::path qids, pids, snapshot, out, whitelist, model, embeddings, references, cache_dir;
    std::string endpoint, sparql_endpoint;
    std::string format = "both";
    std::string mode = "analogy";
    std::string reference_mode = "keep-only";
    unsigned max_depth = 0;
    std::size_t degree_cap = 5000;
    std::size_t k = 20;
    double tau = 0.5;
    double rps_cap = 0;
    std::uint64_t seed = 0;
    bool no_labels = false;
};

struct SourceFlags {
    fs::path snapshot, model, embeddings, references, cache_dir;
    std::string endpoint, sparql_endpoint;
    double rps_cap = 0;
};

Runtime build_runtime(const SourceFlags& f, bool want_analogy, std::ostream& err) {
    Runtime rt;
    if (!f.snapshot.empty()) {
        rt.snapshot = load_snapshot_file(f.snapshot, err);
    } else {
        EndpointConfig ep = EndpointConfig::from_env();
        if (!f.endpoint.empty()) ep.base_url = f.endpoint;
        if (!f.sparql_endpoint.empty()) ep.sparql_url = f.sparql_endpoint;
        if (f.rps_cap > 0) ep.requests_per_second = f.rps_cap;
        ep.check();
        rt.endpoint = ep;
        if (!f.cache_dir.empty()) rt.cache_dir = f.cache_dir;
        else if (const char* env = std::getenv("KGP_CACHE_DIR"); env && *env) rt.cache_dir = fs::path(env);
    }
    if (want_analogy) {
        if (f.model.empty() || f.embeddings.empty() || f.references.empty())
            fail(ErrorKind::ValidationError, "analogy mode needs --model, --embeddings and --references");
        auto bundle = load_analogy(f.model, f.embeddings, f.references);
        if (bundle.dropped_references > 0)
            err << "warning: " << bundle.dropped_references << " reference decision(s) have unembedded entities\n";
        rt.analogy = std::make_shared<const AnalogyBundle>(std::move(bundle));
    }
    return rt;
}

ClassifierMode parse_mode(const std::string& s) {
    if (s == "analogy") return ClassifierMode::Analogy;
    if (s == "keep-all") return ClassifierMode::KeepAll;
    return ClassifierMode::Whitelist;
}

ReferenceMode parse_reference_mode(const std::string& s) {
    return s == "both-classes" ? ReferenceMode::BothClasses : ReferenceMode::KeepOnly;
}

int cmd_extract(const ExtractFlags& f, const SourceFlags& src, std::ostream& out, std::ostream& err) {
    ExtractionTask task;
    task.seeds = parsed_or_throw(parse_qid_lines(read_text(f.qids)), "qids");
    task.properties = parsed_or_throw(parse_pid_lines(read_text(f.pids)), "pids");
    if (f.max_depth > 0) task.max_depth = f.max_depth;
    task.degree_cap = f.degree_cap;
    task.k = f.k;
    task.tau = f.tau;
    task.mode = parse_mode(f.mode);
    task.reference_mode = parse_reference_mode(f.reference_mode);
    if (task.mode == ClassifierMode::Whitelist) {
        if (f.whitelist.empty()) fail(ErrorKind::ValidationError, "--mode whitelist needs --whitelist FILE");
        for (EntityId e : parsed_or_throw(parse_qid_lines(read_text(f.whitelist)), "whitelist")) task.whitelist.insert(e);
    }

    const Runtime rt = build_runtime(src, task.mode == ClassifierMode::Analogy, err);
    std::string fatal;
    for (const auto& d : validate(task, rt.analogy ? rt.analogy->references.size() : 0)) {
        if (d.severity == Diagnostic::Severity::Fatal) fatal += (fatal.empty() ? "" : "; ") + d.message;
        else err << "warning: " << d.message << "\n";
    }
    if (!fatal.empty()) fail(ErrorKind::ValidationError, fatal);

    const auto executor = make_executor(rt);
    const ExtractionResult result = executor(task, {});

    fs::create_directories(f.out);
    const bool json_out = f.format != "nt";
    const bool nt_out = f.format != "json";
    if (json_out) write_text(f.out / "result.json", to_json(result));
    if (nt_out) write_text(f.out / "result.nt", to_ntriples(result, {.labels = !f.no_labels}));

    const auto& s = result.stats;
    out << "seeds " << result.task.seeds.size() << "  visited " << s.visited << "  kept " << s.kept << "  pruned "
        << s.pruned << "  unembedded " << s.unembedded << "  truncated fetches " << s.truncated_fetches << "  edges "
        << result.edges.size() << "\n";
    out << "wall time " << fixed(std::chrono::duration<double>(s.wall_time).count(), 3) << " s\n";
    if (json_out) out << "wrote " << (f.out / "result.json").string() << "\n";
    if (nt_out) out << "wrote " << (f.out / "result.nt").string() << "\n";
    return kOk;
}

struct EmbeddingFlags {
    fs::path triples, out, report;
    TransEConfig config;
    std::string norm = "l2";
    std::size_t cutoff = 10;
};

int cmd_train_embeddings(EmbeddingFlags f, std::ostream& out, std::ostream& err) {
    f.config.norm = f.norm == "l1" ? NormOrder::L1 : NormOrder::L2;
    const auto snapshot = load_snapshot_file(f.triples, err);
    const std::vector<Triple> triples(snapshot->triples().begin(), snapshot->triples().end());
    const auto trained = train_transe(triples, f.config);
    save_embeddings(f.out, trained.table);
    const auto ranking = tail_ranking(trained.table, triples, f.config.norm, f.cutoff);

    const double last = trained.epoch_losses.empty() ? 0.0 : trained.epoch_losses.back();
    out << "triples " << triples.size() << "  entities " << trained.table.entity_ids().size() << "  relations "
        << trained.table.relation_ids().size() << "  dimension " << trained.table.dimension() << "\n";
    out << "epochs " << f.config.epochs << "  last epoch loss " << fixed(last, 6) << "  skipped samples "
        << trained.skipped_samples << "\n";
    out << "tail hits@" << f.cutoff << " " << fixed(ranking.hit_ratio) << " (" << ranking.hits << "/" << ranking.triples
        << ")  mean rank " << fixed(ranking.mean_rank, 2) << "\n";
    out << "wrote " << f.out.string() << "\n";

    if (!f.report.empty()) {
        const json report = {
            {"triples", triples.size()},
            {"config",
             {{"dimension", f.config.dimension}, {"margin", f.config.margin}, {"learning_rate", f.config.learning_rate},
              {"epochs", f.config.epochs}, {"batch_size", f.config.batch_size},
              {"negatives_per_positive", f.config.negatives_per_positive}, {"norm", f.norm}, {"seed", f.config.seed}}},
            {"epoch_losses", trained.epoch_losses},
            {"skipped_samples", trained.skipped_samples},
            {"tail_ranking",
             {{"cutoff", f.cutoff}, {"hits", ranking.hits}, {"hit_ratio", ranking.hit_ratio}, {"mean_rank", ranking.mean_rank}}}};
        write_text(f.report, report.dump(2) + "\n");
    }
    return kOk;
}

struct ModelFlags {
    fs::path decisions, embeddings, out, report;
    TrainConfig config;
    std::string optimizer = "adam";
};

QuadrupleSet quadruples_from(const fs::path& decisions, const EmbeddingTable& table, std::uint64_t seed,
                             std::ostream& err) {
    const auto dataset = load_decision_csv(decisions);
    if (dataset.self_decisions > 0)
        err << "warning: " << dataset.self_decisions << " decision(s) pair an entity with itself\n";
    auto set = build_training_quadruples(dataset.examples, table, seed);
    if (set.dropped_examples > 0)
        err << "warning: " << set.dropped_examples << " decision(s) dropped for missing embeddings\n";
    return set;
}

int cmd_train_model(ModelFlags f, std::ostream& out, std::ostream& err) {
    f.config.optimizer = f.optimizer == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
    const auto table = load_embeddings(f.embeddings);
    const auto set = quadruples_from(f.decisions, table, f.config.seed, err);
    const auto valid = std::count_if(set.items.begin(), set.items.end(), [](const auto& q) { return q.valid; });
    const auto trained = train_model(set.items, f.config);
    save_model(f.out, trained.model);

    out << "quadruples " << set.items.size() << " (valid " << valid << ", invalid " << set.items.size() - valid
        << ")\n";
    out << "parameters " << trained.model.param_count() << "  filters " << f.config.conv1_filters << "/"
        << f.config.conv2_filters << "  dimension " << table.dimension() << "\n";
    out << "initial loss " << fixed(trained.initial_loss, 6);
    if (f.config.epochs > 0) out << "  final loss " << fixed(trained.final_loss, 6);
    out << "  epochs " << f.config.epochs << "\n";
    out << "wrote " << f.out.string() << "\n";

    if (!f.report.empty()) {
        json report = {
            {"quadruples", set.items.size()},
            {"valid", valid},
            {"dropped_examples", set.dropped_examples},
            {"parameters", trained.model.param_count()},
            {"config",
             {{"learning_rate", f.config.learning_rate}, {"epochs", f.config.epochs}, {"batch_size", f.config.batch_size},
              {"seed", f.config.seed}, {"conv1_filters", f.config.conv1_filters},
              {"conv2_filters", f.config.conv2_filters}, {"conv2_stride", f.config.conv2_stride},
              {"optimizer", f.optimizer}}},
            {"initial_loss", trained.initial_loss}};
        if (f.config.epochs > 0) {
            report["final_loss"] = trained.final_loss;
            report["epoch_losses"] = trained.epoch_losses;
        }
        write_text(f.report, report.dump(2) + "\n");
    }
    return kOk;
}

struct EvalFlags {
    fs::path predictions, model, embeddings, decisions, report;
    double threshold = 0.5;
    std::uint64_t seed = 0;
};

bool parse_label(std::string s, std::size_t line) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "valid" || s == "1" || s == "true" || s == "keep") return true;
    if (s == "invalid" || s == "0" || s == "false" || s == "prune") return false;
    fail(ErrorKind::FormatError, "predictions line " + std::to_string(line) + ": unknown label '" + s + "'");
}

std::string trimmed(std::string s) {
    const auto a = s.find_first_not_of(" \t\r\"");
    const auto b = s.find_last_not_of(" \t\r\"");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

// "probability,label" with a header row.
void read_predictions(const fs::path& path, std::vector<double>& probs, std::vector<bool>& labels) {
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty() || line_no == 1) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            fail(ErrorKind::FormatError, "predictions line " + std::to_string(line_no) + ": expected probability,label");
        const std::string p = trimmed(line.substr(0, comma));
        char* end = nullptr;
        const double v = std::strtod(p.c_str(), &end);
        if (p.empty() || *end || !(v >= 0.0 && v <= 1.0))
            fail(ErrorKind::FormatError, "predictions line " + std::to_string(line_no) + ": bad probability '" + p + "'");
        probs.push_back(v);
        labels.push_back(parse_label(trimmed(line.substr(comma + 1)), line_no));
    }
    if (probs.empty()) fail(ErrorKind::InsufficientData, "no predictions in " + path.string());
}

int cmd_evaluate(const EvalFlags& f, std::ostream& out, std::ostream& err) {
    Metrics m;
    std::optional<std::size_t> params;
    std::size_t samples = 0;
    if (!f.predictions.empty()) {
        std::vector<double> probs;
        std::vector<bool> labels;
        read_predictions(f.predictions, probs, labels);
        const std::unique_ptr<bool[]> flags(new bool[labels.size()]);
        std::copy(labels.begin(), labels.end(), flags.get());
        m = compute_metrics(probs, std::span<const bool>(flags.get(), labels.size()), f.threshold);
        samples = probs.size();
    } else {
        if (f.model.empty() || f.embeddings.empty() || f.decisions.empty())
            fail(ErrorKind::ValidationError, "evaluate needs --predictions, or --model with --embeddings and --decisions");
        const auto model = load_model(f.model);
        const auto table = load_embeddings(f.embeddings);
        const auto set = quadruples_from(f.decisions, table, f.seed, err);
        m = evaluate(model, set.items, f.threshold);
        params = model.param_count();
        samples = set.items.size();
    }

    const auto show = [](const std::optional<double>& v) { return v ? fixed(*v) : std::string("undefined"); };
    out << "samples    " << samples << "\n";
    out << "precision  " << show(m.precision) << "\n";
    out << "recall     " << show(m.recall) << "\n";
    out << "f1         " << show(m.f1) << "\n";
    out << "accuracy   " << show(m.accuracy) << "\n";
    out << "parameters " << (params ? std::to_string(*params) : std::string("n/a")) << "\n";
    out << "confusion  tp " << m.confusion.true_positive << "  fp " << m.confusion.false_positive << "  tn "
        << m.confusion.true_negative << "  fn " << m.confusion.false_negative << "\n";

    if (!f.report.empty()) {
        const json report = {{"samples", samples},
                             {"threshold", f.threshold},
                             {"precision", optional_number(m.precision)},
                             {"recall", optional_number(m.recall)},
                             {"f1", optional_number(m.f1)},
                             {"accuracy", optional_number(m.accuracy)},
                             {"parameters", params ? json(*params) : json(nullptr)},
                             {"confusion",
                              {{"tp", m.confusion.true_positive}, {"fp", m.confusion.false_positive},
                               {"tn", m.confusion.true_negative}, {"fn", m.confusion.false_negative}}}};
        write_text(f.report, report.dump(2) + "\n");
    }
    return kOk;
}

struct SearchFlags {
    std::vector<std::size_t> targets{1401, 251};
    std::vector<std::size_t> dims{10, 20, 50, 100, 200};
    std::vector<std::size_t> strides{1, 2};
    std::size_t max_filters = 32;
    fs::path report;
};

int cmd_param_search(const SearchFlags& f, std::ostream& out) {
    json report = json::object();
    for (std::size_t target : f.targets) {
        json matches = json::array();
        for (std::size_t stride : f.strides)
            for (std::size_t d : f.dims)
                for (std::size_t n1 = 1; n1 <= f.max_filters; ++n1)
                    for (std::size_t n2 = 1; n2 <= f.max_filters; ++n2) {
                        if (d < 2) continue;
                        const ModelShape shape{d, n1, n2, stride};
                        if (param_count(shape) == target)
                            matches.push_back({{"dimension", d}, {"conv1_filters", n1}, {"conv2_filters", n2},
                                               {"conv2_stride", stride}});
                    }
        out << "target " << target << ": ";
        if (matches.empty()) {
            out << "no configuration reproduces this count\n";
        } else {
            out << matches.size() << " configuration(s)\n";
            for (const auto& m : matches)
                out << "  d=" << m["dimension"] << " n1=" << m["conv1_filters"] << " n2=" << m["conv2_filters"]
                    << " stride=" << m["conv2_stride"] << "\n";
        }
        report[std::to_string(target)] = matches;
    }
    if (!f.report.empty()) {
        const json full = {{"search",
                            {{"max_filters", f.max_filters}, {"dimensions", f.dims}, {"strides", f.strides}}},
                           {"matches", report}};
        write_text(f.report, full.dump(2) + "\n");
    }
    return kOk;
}

struct ServeFlags {
    std::string host = "0.0.0.0";
    int port = 8080;
    fs::path data_dir, static_dir;
    unsigned workers = 0;
    long retention_days = -1;
    std::string default_mode;
};

int cmd_serve(const ServeFlags& f, const SourceFlags& src, std::ostream& out, std::ostream& err) {
    ServiceConfig config = ServiceConfig::from_env();
    int port = f.port;
    if (const char* env = std::getenv("KGP_PORT"); env && *env && f.port == 8080) port = std::atoi(env);
    if (!f.data_dir.empty()) config.data_dir = f.data_dir;
    if (f.workers > 0) config.workers = f.workers;
    if (f.retention_days >= 0) config.retention = std::chrono::hours(24 * f.retention_days);

    const bool have_analogy = !src.model.empty() || !src.embeddings.empty() || !src.references.empty();
    const Runtime rt = build_runtime(src, have_analogy, err);
    config.defaults.mode = have_analogy ? ClassifierMode::Analogy : ClassifierMode::KeepAll;
    if (!f.default_mode.empty()) config.defaults.mode = parse_mode(f.default_mode);
    config.reference_count = rt.analogy ? rt.analogy->references.size() : 0;

    fs::path static_dir = f.static_dir;
    if (static_dir.empty())
        if (const char* env = std::getenv("KGP_STATIC_DIR"); env && *env) static_dir = env;

    // Block termination signals before any thread starts so that only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    JobService service(config, make_executor(rt));
    HttpApi api(service, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
    const int bound = api.bind(f.host, port);
    out << "listening on http://" << f.host << ":" << bound << "  data " << config.data_dir.string() << "  workers "
        << config.worker_count() << "  default mode " << to_string(config.defaults.mode) << std::endl;
    api.start();
    int sig = 0;
    sigwait(&signals, &sig);
    out << "shutting down" << std::endl;
    api.stop();
    service.shutdown();
    return kOk;
}

void add_source_flags(CLI::App* cmd, SourceFlags& s) {
    cmd->add_option("--snapshot", s.snapshot, "Snapshot file (N-Triples)")->check(CLI::ExistingFile);
    cmd->add_option("--endpoint", s.endpoint, "Wikidata-compatible base URL (live mode)");
    cmd->add_option("--sparql-endpoint", s.sparql_endpoint, "SPARQL endpoint for inverse edges (live mode)");
    cmd->add_option("--cache-dir", s.cache_dir, "Entity cache directory (live mode)");
    cmd->add_option("--rps-cap", s.rps_cap, "Requests per second towards the endpoint");
    cmd->add_option("--model", s.model, "Analogy model (KGPM)")->check(CLI::ExistingFile);
    cmd->add_option("--embeddings", s.embeddings, "Embedding table (KGPE)")->check(CLI::ExistingFile);
    cmd->add_option("--references", s.references, "Reference decisions (CSV)")->check(CLI::ExistingFile);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Seeded subgraph extraction from Wikidata-shaped knowledge graphs", "kgprune"};
    app.require_subcommand(1);

    ExtractFlags ex;
    SourceFlags ex_src;
    auto* extract_cmd = app.add_subcommand("extract", "Extract the subgraph around seed entities");
    extract_cmd->add_option("--qids", ex.qids, "Seed entities, one QID per line")->required()->check(CLI::ExistingFile);
    extract_cmd->add_option("--pids", ex.pids, "Properties to traverse, one PID or (-)PID per line")
        ->required()
        ->check(CLI::ExistingFile);
    extract_cmd->add_option("--out", ex.out, "Output directory")->required();
    extract_cmd->add_option("--format", ex.format, "json, nt or both")
        ->check(CLI::IsMember({"json", "nt", "both"}))
        ->capture_default_str();
    extract_cmd->add_option("--max-depth", ex.max_depth, "Maximum traversal depth (0 = unlimited)");
    extract_cmd->add_option("--degree-cap", ex.degree_cap, "Neighbours considered per entity")->capture_default_str();
    extract_cmd->add_option("--k", ex.k, "Reference decisions consulted per neighbour")->capture_default_str();
    extract_cmd->add_option("--tau", ex.tau, "Analogy probability threshold")->capture_default_str();
    extract_cmd->add_option("--mode", ex.mode, "analogy, keep-all or whitelist")
        ->check(CLI::IsMember({"analogy", "keep-all", "whitelist"}))
        ->capture_default_str();
    extract_cmd->add_option("--reference-mode", ex.reference_mode, "keep-only or both-classes")
        ->check(CLI::IsMember({"keep-only", "both-classes"}))
        ->capture_default_str();
    extract_cmd->add_option("--whitelist", ex.whitelist, "QIDs kept in whitelist mode")->check(CLI::ExistingFile);
    extract_cmd->add_option("--seed", ex.seed, "Random seed (extraction itself is deterministic)");
    extract_cmd->add_flag("--no-labels", ex.no_labels, "Omit rdfs:label lines from N-Triples output");
    add_source_flags(extract_cmd, ex_src);

    EmbeddingFlags emb;
    auto* emb_cmd = app.add_subcommand("train-embeddings", "Train TransE embeddings on a snapshot");
    emb_cmd->add_option("--triples", emb.triples, "Snapshot file (N-Triples)")->required()->check(CLI::ExistingFile);
    emb_cmd->add_option("--out", emb.out, "Output embedding file (KGPE)")->required();
    emb_cmd->add_option("--report", emb.report, "Write a JSON training report");
    emb_cmd->add_option("--dim", emb.config.dimension)->capture_default_str()->check(CLI::PositiveNumber);
    emb_cmd->add_option("--margin", emb.config.margin)->capture_default_str()->check(CLI::PositiveNumber);
    emb_cmd->add_option("--lr", emb.config.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    emb_cmd->add_option("--epochs", emb.config.epochs)->capture_default_str();
    emb_cmd->add_option("--batch", emb.config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    emb_cmd->add_option("--negatives", emb.config.negatives_per_positive)->capture_default_str()->check(CLI::PositiveNumber);
    emb_cmd->add_option("--norm", emb.norm)->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();
    emb_cmd->add_option("--seed", emb.config.seed)->capture_default_str();
    emb_cmd->add_option("--hits-cutoff", emb.cutoff, "Rank cutoff for the tail ranking report")->capture_default_str();

    ModelFlags mdl;
    auto* mdl_cmd = app.add_subcommand("train-model", "Train the analogy classifier on keep/prune decisions");
    mdl_cmd->add_option("--decisions", mdl.decisions, "Decision dataset (CSV)")->required()->check(CLI::ExistingFile);
    mdl_cmd->add_option("--embeddings", mdl.embeddings, "Embedding table (KGPE)")->required()->check(CLI::ExistingFile);
    mdl_cmd->add_option("--out", mdl.out, "Output model file (KGPM)")->required();
    mdl_cmd->add_option("--report", mdl.report, "Write a JSON training report");
    mdl_cmd->add_option("--epochs", mdl.config.epochs)->capture_default_str();
    mdl_cmd->add_option("--lr", mdl.config.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    mdl_cmd->add_option("--batch", mdl.config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    mdl_cmd->add_option("--n1", mdl.config.conv1_filters, "First convolution filters")->capture_default_str()->check(CLI::PositiveNumber);
    mdl_cmd->add_option("--n2", mdl.config.conv2_filters, "Second convolution filters")->capture_default_str()->check(CLI::PositiveNumber);
    mdl_cmd->add_option("--stride", mdl.config.conv2_stride, "Second convolution stride")->capture_default_str()->check(CLI::PositiveNumber);
    mdl_cmd->add_option("--optimizer", mdl.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
    mdl_cmd->add_option("--seed", mdl.config.seed)->capture_default_str();

    EvalFlags ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Precision, recall, F1 and accuracy of analogy predictions");
    eval_cmd->add_option("--predictions", ev.predictions, "CSV of probability,label rows")->check(CLI::ExistingFile);
    eval_cmd->add_option("--model", ev.model, "Analogy model (KGPM)")->check(CLI::ExistingFile);
    eval_cmd->add_option("--embeddings", ev.embeddings, "Embedding table (KGPE)")->check(CLI::ExistingFile);
    eval_cmd->add_option("--decisions", ev.decisions, "Decision dataset (CSV)")->check(CLI::ExistingFile);
    eval_cmd->add_option("--threshold", ev.threshold)->capture_default_str();
    eval_cmd->add_option("--seed", ev.seed, "Seed for quadruple construction")->capture_default_str();
    eval_cmd->add_option("--report", ev.report, "Write the metrics as JSON");

    SearchFlags search;
    auto* search_cmd = app.add_subcommand("param-search", "Find filter configurations with a given parameter count");
    search_cmd->add_option("--target", search.targets, "Parameter counts to look for")->capture_default_str();
    search_cmd->add_option("--dims", search.dims, "Embedding dimensions")->capture_default_str()->delimiter(',');
    search_cmd->add_option("--strides", search.strides, "Second convolution strides")->capture_default_str()->delimiter(',');
    search_cmd->add_option("--max-filters", search.max_filters)->capture_default_str();
    search_cmd->add_option("--report", search.report, "Write the matches as JSON");

    ServeFlags serve;
    SourceFlags serve_src;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP job service");
    serve_cmd->add_option("--host", serve.host)->capture_default_str();
    serve_cmd->add_option("--port", serve.port, "Port (default KGP_PORT or 8080)");
    serve_cmd->add_option("--data-dir", serve.data_dir, "Job log and results (default KGP_DATA_DIR)");
    serve_cmd->add_option("--workers", serve.workers, "Worker threads (default KGP_WORKERS or min(cores, 4))");
    serve_cmd->add_option("--retention-days", serve.retention_days, "Result retention (default KGP_RETENTION_DAYS or 7)");
    serve_cmd->add_option("--static", serve.static_dir, "Web UI bundle served at / (default KGP_STATIC_DIR)");
    serve_cmd->add_option("--default-mode", serve.default_mode, "Mode for jobs that do not choose one")
        ->check(CLI::IsMember({"analogy", "keep-all", "whitelist"}));
    add_source_flags(serve_cmd, serve_src);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        std::string name = "kgprune";
        for (const auto* sub : app.get_subcommands()) name += " " + sub->get_name();
        err << "run '" << name << " --help' for usage\n";
        return kUsage;
    }

    try {
        if (*extract_cmd) {
            if (ex_src.snapshot.empty() && ex_src.endpoint.empty() && !std::getenv("KGP_ENDPOINT"))
                fail(ErrorKind::ValidationError, "extract needs --snapshot FILE or --endpoint URL");
            return cmd_extract(ex, ex_src, out, err);
        }
        if (*emb_cmd) return cmd_train_embeddings(emb, out, err);
        if (*mdl_cmd) return cmd_train_model(mdl, out, err);
        if (*eval_cmd) return cmd_evaluate(ev, out, err);
        if (*search_cmd) return cmd_param_search(search, out);
        if (*serve_cmd) {
            if (serve_src.snapshot.empty() && serve_src.endpoint.empty() && !std::getenv("KGP_ENDPOINT"))
                fail(ErrorKind::ValidationError, "serve needs --snapshot FILE or --endpoint URL");
            return cmd_serve(serve, serve_src, out, err);
        }
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}

}  // namespace kgp
