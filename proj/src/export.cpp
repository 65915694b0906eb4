#include "kgprune/export.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "kgprune/error.hpp"
#include "kgprune/rdf.hpp"

namespace kgp {
namespace {

using nlohmann::json;

std::string_view direction_name(Direction d) { return d == Direction::Direct ? "direct" : "inverse"; }

json config_json(const std::vector<EntityId>& seeds, const std::vector<PropertySpec>& properties,
                 const TaskConfigEcho& c) {
    json seed_list = json::array();
    for (EntityId s : seeds) seed_list.push_back(to_string(s));
    json prop_list = json::array();
    for (const auto& p : properties) prop_list.push_back(to_string(p));
    json whitelist = json::array();
    for (EntityId w : c.whitelist) whitelist.push_back(to_string(w));
    json config = {{"max_depth", c.max_depth ? json(*c.max_depth) : json(nullptr)},
                   {"degree_cap", c.degree_cap},
                   {"k", c.k},
                   {"tau", c.tau},
                   {"reference_mode", to_string(c.reference_mode)},
                   {"mode", to_string(c.mode)},
                   {"whitelist", std::move(whitelist)}};
    return {{"seeds", std::move(seed_list)}, {"properties", std::move(prop_list)}, {"config", std::move(config)}};
}

std::string digest_of(const json& task_part) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : task_part.dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TaskConfigEcho echo_of(const ExtractionTask& t) {
    return {t.max_depth, t.degree_cap, t.k, t.tau, t.reference_mode, t.mode,
            std::vector<EntityId>(t.whitelist.begin(), t.whitelist.end())};
}

json node_json(const DocumentNode& n) {
    json j = {{"id", to_string(n.id)}, {"decision", to_string(n.decision)}, {"depth", n.depth}};
    if (n.label) j["label"] = *n.label;
    if (n.language) j["language"] = *n.language;
    if (n.description) j["description"] = *n.description;
    if (n.via) j["via"] = {{"parent", to_string(n.via->parent)}, {"property", to_string(n.via->spec)}};
    if (n.votes) j["votes"] = {{"keep", n.votes->keep}, {"cast", n.votes->cast}, {"selected", n.votes->selected}};
    return j;
}

// Strict reader: every access names its JSON pointer.
class Reader {
public:
    [[noreturn]] static void bad(const std::string& path, const std::string& what) {
        fail(ErrorKind::SchemaError, "at " + (path.empty() ? std::string("/") : path) + ": " + what);
    }

    static const json& object(const json& j, const std::string& path, std::initializer_list<const char*> required,
                              std::initializer_list<const char*> optional = {}) {
        if (!j.is_object()) bad(path, "expected an object");
        for (const auto& [key, value] : j.items()) {
            const auto known = [&](std::initializer_list<const char*> names) {
                return std::any_of(names.begin(), names.end(), [&](const char* n) { return key == n; });
            };
            if (!known(required) && !known(optional)) bad(path + "/" + key, "unknown field");
        }
        for (const char* key : required)
            if (!j.contains(key)) bad(path + "/" + key, "missing field");
        return j;
    }

    static const json& array(const json& j, const std::string& path) {
        if (!j.is_array()) bad(path, "expected an array");
        return j;
    }

    static std::string string(const json& j, const std::string& path) {
        if (!j.is_string()) bad(path, "expected a string");
        return j.get<std::string>();
    }

    static std::uint64_t unsigned_int(const json& j, const std::string& path) {
        if (!j.is_number_unsigned()) bad(path, "expected a non-negative integer");
        return j.get<std::uint64_t>();
    }

    static double number(const json& j, const std::string& path) {
        if (!j.is_number()) bad(path, "expected a number");
        return j.get<double>();
    }

    static EntityId entity(const json& j, const std::string& path) {
        try {
            return parse_entity_id(string(j, path));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::SchemaError) throw;
            bad(path, e.what());
        }
    }

    static PropertySpec spec(const json& j, const std::string& path) {
        try {
            return parse_property_spec(string(j, path));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::SchemaError) throw;
            bad(path, e.what());
        }
    }
};

NodeDecision decision_from(const std::string& s, const std::string& path) {
    for (auto d : {NodeDecision::Seed, NodeDecision::Kept, NodeDecision::Pruned, NodeDecision::Unembedded})
        if (s == to_string(d)) return d;
    Reader::bad(path, "decision '" + s + "' is not one of seed, kept, pruned, unembedded");
}

TaskConfigEcho parse_config(const json& j, const std::string& path) {
    Reader::object(j, path, {"max_depth", "degree_cap", "k", "tau", "reference_mode", "mode", "whitelist"});
    TaskConfigEcho c;
    if (!j["max_depth"].is_null()) {
        const auto v = Reader::unsigned_int(j["max_depth"], path + "/max_depth");
        if (v == 0 || v > 0xFFFFFFFFull) Reader::bad(path + "/max_depth", "expected null or a positive integer");
        c.max_depth = static_cast<unsigned>(v);
    }
    c.degree_cap = Reader::unsigned_int(j["degree_cap"], path + "/degree_cap");
    c.k = Reader::unsigned_int(j["k"], path + "/k");
    c.tau = Reader::number(j["tau"], path + "/tau");
    const auto rm = Reader::string(j["reference_mode"], path + "/reference_mode");
    if (rm == to_string(ReferenceMode::KeepOnly)) c.reference_mode = ReferenceMode::KeepOnly;
    else if (rm == to_string(ReferenceMode::BothClasses)) c.reference_mode = ReferenceMode::BothClasses;
    else Reader::bad(path + "/reference_mode", "unknown reference mode '" + rm + "'");
    const auto mode = Reader::string(j["mode"], path + "/mode");
    if (mode == to_string(ClassifierMode::Analogy)) c.mode = ClassifierMode::Analogy;
    else if (mode == to_string(ClassifierMode::KeepAll)) c.mode = ClassifierMode::KeepAll;
    else if (mode == to_string(ClassifierMode::Whitelist)) c.mode = ClassifierMode::Whitelist;
    else Reader::bad(path + "/mode", "unknown classifier mode '" + mode + "'");
    const auto& wl = Reader::array(j["whitelist"], path + "/whitelist");
    for (std::size_t i = 0; i < wl.size(); ++i)
        c.whitelist.push_back(Reader::entity(wl[i], path + "/whitelist/" + std::to_string(i)));
    return c;
}

DocumentNode parse_node(const json& j, const std::string& path) {
    Reader::object(j, path, {"id", "decision", "depth"}, {"label", "language", "description", "via", "votes"});
    DocumentNode n;
    n.id = Reader::entity(j["id"], path + "/id");
    n.decision = decision_from(Reader::string(j["decision"], path + "/decision"), path + "/decision");
    const auto depth = Reader::unsigned_int(j["depth"], path + "/depth");
    if (depth > 0xFFFFFFFFull) Reader::bad(path + "/depth", "depth out of range");
    n.depth = static_cast<unsigned>(depth);
    if (j.contains("label")) n.label = Reader::string(j["label"], path + "/label");
    if (j.contains("language")) n.language = Reader::string(j["language"], path + "/language");
    if (j.contains("description")) n.description = Reader::string(j["description"], path + "/description");
    if (j.contains("via")) {
        const auto& v = Reader::object(j["via"], path + "/via", {"parent", "property"});
        n.via = Via{Reader::entity(v["parent"], path + "/via/parent"), Reader::spec(v["property"], path + "/via/property")};
    }
    if (j.contains("votes")) {
        const auto& v = Reader::object(j["votes"], path + "/votes", {"keep", "cast", "selected"});
        n.votes = VoteTally{Reader::unsigned_int(v["keep"], path + "/votes/keep"),
                            Reader::unsigned_int(v["cast"], path + "/votes/cast"),
                            Reader::unsigned_int(v["selected"], path + "/votes/selected")};
    }
    if (n.language && !n.label) Reader::bad(path + "/language", "language without label");
    if ((n.decision == NodeDecision::Seed) != (n.depth == 0))
        Reader::bad(path + "/depth", "depth 0 is reserved for seed nodes");
    if (n.decision == NodeDecision::Seed && n.via) Reader::bad(path + "/via", "seed nodes have no via");
    return n;
}

DocumentEdge parse_edge(const json& j, const std::string& path) {
    Reader::object(j, path, {"source", "property", "target", "direction"});
    DocumentEdge e;
    e.source = Reader::entity(j["source"], path + "/source");
    try {
        e.property = parse_property_number(Reader::string(j["property"], path + "/property"));
    } catch (const Error& err) {
        if (err.kind() == ErrorKind::SchemaError) throw;
        Reader::bad(path + "/property", err.what());
    }
    e.target = Reader::entity(j["target"], path + "/target");
    const auto dir = Reader::string(j["direction"], path + "/direction");
    if (dir == "direct") e.direction = Direction::Direct;
    else if (dir == "inverse") e.direction = Direction::Inverse;
    else Reader::bad(path + "/direction", "direction '" + dir + "' is not direct or inverse");
    return e;
}

}  // namespace

Triple DocumentEdge::canonical() const {
    return canonical_triple(source, PropertySpec{property, direction}, target);
}

std::string_view to_string(ReferenceMode m) noexcept {
    return m == ReferenceMode::KeepOnly ? "keep-only" : "both-classes";
}

std::string_view to_string(ClassifierMode m) noexcept {
    switch (m) {
        case ClassifierMode::Analogy: return "analogy";
        case ClassifierMode::KeepAll: return "keep-all";
        case ClassifierMode::Whitelist: return "whitelist";
    }
    return "?";
}

std::string config_digest(const ExtractionTask& task) {
    return digest_of(config_json(task.seeds, task.properties, echo_of(task)));
}

ResultDocument to_document(const ExtractionResult& result) {
    ResultDocument doc;
    doc.seeds = result.task.seeds;
    doc.properties = result.task.properties;
    doc.config = echo_of(result.task);
    doc.config_digest = config_digest(result.task);
    for (const auto& [id, rec] : result.records) {
        DocumentNode n;
        n.id = id;
        n.decision = rec.decision;
        n.depth = rec.depth;
        n.via = rec.via;
        n.votes = rec.votes;
        if (auto it = result.labels.find(id); it != result.labels.end()) {
            n.label = it->second.text;
            n.language = it->second.language;
            if (!it->second.description.empty()) n.description = it->second.description;
        }
        doc.nodes.push_back(std::move(n));
    }
    for (const auto& e : result.edges) doc.edges.push_back({e.source, e.spec.property, e.target, e.spec.direction});
    std::sort(doc.edges.begin(), doc.edges.end());
    doc.stats = {result.stats.visited, result.stats.kept, result.stats.pruned, result.stats.unembedded,
                 result.stats.truncated_fetches};
    return doc;
}

std::string to_json(const ResultDocument& doc) {
    json task = config_json(doc.seeds, doc.properties, doc.config);
    task["config_digest"] = doc.config_digest;
    json nodes = json::array();
    for (const auto& n : doc.nodes) nodes.push_back(node_json(n));
    json edges = json::array();
    for (const auto& e : doc.edges)
        edges.push_back({{"source", to_string(e.source)}, {"property", property_text(e.property)},
                         {"target", to_string(e.target)}, {"direction", direction_name(e.direction)}});
    const json stats = {{"visited", doc.stats.visited}, {"kept", doc.stats.kept}, {"pruned", doc.stats.pruned},
                        {"unembedded", doc.stats.unembedded}, {"truncated_fetches", doc.stats.truncated_fetches}};
    const json out = {{"schema", kResultSchema}, {"task", std::move(task)}, {"nodes", std::move(nodes)},
                      {"edges", std::move(edges)}, {"stats", stats}};
    return out.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::string to_json(const ExtractionResult& result) {
    return to_json(to_document(result));
}

ResultDocument parse_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::SchemaError, std::string("not JSON: ") + e.what());
    }
    Reader::object(j, "", {"schema", "task", "nodes", "edges", "stats"});
    const auto schema = Reader::string(j["schema"], "/schema");
    if (schema != kResultSchema)
        Reader::bad("/schema", "unsupported schema '" + schema + "' (expected " + std::string(kResultSchema) + ")");

    ResultDocument doc;
    const auto& task = Reader::object(j["task"], "/task", {"seeds", "properties", "config", "config_digest"});
    const auto& seeds = Reader::array(task["seeds"], "/task/seeds");
    for (std::size_t i = 0; i < seeds.size(); ++i)
        doc.seeds.push_back(Reader::entity(seeds[i], "/task/seeds/" + std::to_string(i)));
    const auto& props = Reader::array(task["properties"], "/task/properties");
    for (std::size_t i = 0; i < props.size(); ++i)
        doc.properties.push_back(Reader::spec(props[i], "/task/properties/" + std::to_string(i)));
    doc.config = parse_config(task["config"], "/task/config");
    doc.config_digest = Reader::string(task["config_digest"], "/task/config_digest");
    if (doc.config_digest != digest_of(config_json(doc.seeds, doc.properties, doc.config)))
        Reader::bad("/task/config_digest", "digest does not match the task");

    std::set<EntityId> ids;
    const auto& nodes = Reader::array(j["nodes"], "/nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string path = "/nodes/" + std::to_string(i);
        doc.nodes.push_back(parse_node(nodes[i], path));
        if (!ids.insert(doc.nodes.back().id).second) Reader::bad(path + "/id", "duplicate node id");
    }
    const auto& edges = Reader::array(j["edges"], "/edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string path = "/edges/" + std::to_string(i);
        doc.edges.push_back(parse_edge(edges[i], path));
        if (!ids.contains(doc.edges.back().source)) Reader::bad(path + "/source", "edge endpoint is not a node");
        if (!ids.contains(doc.edges.back().target)) Reader::bad(path + "/target", "edge endpoint is not a node");
    }

    const auto& stats = Reader::object(j["stats"], "/stats", {"visited", "kept", "pruned", "unembedded", "truncated_fetches"});
    doc.stats = {Reader::unsigned_int(stats["visited"], "/stats/visited"),
                 Reader::unsigned_int(stats["kept"], "/stats/kept"),
                 Reader::unsigned_int(stats["pruned"], "/stats/pruned"),
                 Reader::unsigned_int(stats["unembedded"], "/stats/unembedded"),
                 Reader::unsigned_int(stats["truncated_fetches"], "/stats/truncated_fetches")};
    return doc;
}

std::string to_ntriples(const ResultDocument& doc, const NTriplesOptions& options) {
    std::map<EntityId, const DocumentNode*> kept;
    for (const auto& n : doc.nodes)
        if (n.decision == NodeDecision::Seed || n.decision == NodeDecision::Kept) kept.emplace(n.id, &n);

    std::set<std::string> lines;
    std::set<EntityId> endpoints;
    for (const auto& e : doc.edges) {
        if (!kept.contains(e.source) || !kept.contains(e.target)) continue;
        const Triple t = e.canonical();
        lines.insert(rdf::triple_line(t));
        endpoints.insert(t.subject);
        endpoints.insert(t.object);
    }
    if (options.labels) {
        for (EntityId id : endpoints) {
            const DocumentNode& n = *kept.at(id);
            if (n.label) lines.insert(rdf::label_line(id, Label{*n.label, n.language.value_or(""), ""}));
        }
    }
    std::string out;
    for (const auto& line : lines) out += line + "\n";
    return out;
}

std::string to_ntriples(const ExtractionResult& result, const NTriplesOptions& options) {
    return to_ntriples(to_document(result), options);
}

}  // namespace kgp
