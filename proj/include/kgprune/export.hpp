#pragma once
// Result documents: canonical JSON ("kgp-result/1") and kept-subgraph N-Triples.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgprune/engine.hpp"

namespace kgp {

inline constexpr std::string_view kResultSchema = "kgp-result/1";

struct TaskConfigEcho {
    std::optional<unsigned> max_depth;
    std::size_t degree_cap = 0;
    std::size_t k = 0;
    double tau = 0.5;
    ReferenceMode reference_mode = ReferenceMode::KeepOnly;
    ClassifierMode mode = ClassifierMode::Analogy;
    std::vector<EntityId> whitelist;

    friend bool operator==(const TaskConfigEcho&, const TaskConfigEcho&) = default;
};

struct DocumentNode {
    EntityId id;
    std::optional<std::string> label;
    std::optional<std::string> language;      // present with label
    std::optional<std::string> description;
    NodeDecision decision = NodeDecision::Seed;
    unsigned depth = 0;
    std::optional<Via> via;
    std::optional<VoteTally> votes;

    friend bool operator==(const DocumentNode&, const DocumentNode&) = default;
};

// `source` was expanded and `target` discovered by following `property` in `direction`.
struct DocumentEdge {
    EntityId source;
    std::uint64_t property = 0;
    EntityId target;
    Direction direction = Direction::Direct;

    Triple canonical() const;
    friend auto operator<=>(const DocumentEdge&, const DocumentEdge&) = default;
};

struct DocumentStats {
    std::size_t visited = 0;
    std::size_t kept = 0;
    std::size_t pruned = 0;
    std::size_t unembedded = 0;
    std::size_t truncated_fetches = 0;

    friend bool operator==(const DocumentStats&, const DocumentStats&) = default;
};

struct ResultDocument {
    std::vector<EntityId> seeds;
    std::vector<PropertySpec> properties;
    TaskConfigEcho config;
    std::string config_digest;
    std::vector<DocumentNode> nodes;   // ascending id
    std::vector<DocumentEdge> edges;   // ascending (source, property, target, direction)
    DocumentStats stats;

    friend bool operator==(const ResultDocument&, const ResultDocument&) = default;
};

std::string_view to_string(ReferenceMode m) noexcept;
std::string_view to_string(ClassifierMode m) noexcept;

// 16 hex digits identifying seeds, properties and configuration.
std::string config_digest(const ExtractionTask& task);

ResultDocument to_document(const ExtractionResult& result);

std::string to_json(const ResultDocument& doc);
std::string to_json(const ExtractionResult& result);

// Strict: unknown or missing fields, wrong types and foreign vocabulary throw
// SchemaError naming the JSON pointer of the offending value.
ResultDocument parse_json(std::string_view text);

struct NTriplesOptions {
    bool labels = true;
};

// Edges whose endpoints are both seed/kept, in stored orientation, plus rdfs:label
// lines for labelled endpoints. Sorted, LF-terminated; empty when nothing is kept.
std::string to_ntriples(const ResultDocument& doc, const NTriplesOptions& options = {});
std::string to_ntriples(const ExtractionResult& result, const NTriplesOptions& options = {});

}  // namespace kgp
