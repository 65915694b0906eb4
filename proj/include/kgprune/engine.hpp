#pragma once
// Breadth-first subgraph extraction with per-neighbour keep/prune decisions.

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kgprune/analogy.hpp"
#include "kgprune/embeddings.hpp"
#include "kgprune/error.hpp"
#include "kgprune/kg_store.hpp"

namespace kgp {

enum class ReferenceMode : std::uint8_t { KeepOnly, BothClasses };
enum class ClassifierMode : std::uint8_t { Analogy, KeepAll, Whitelist };

struct ExtractionTask {
    std::vector<EntityId> seeds;
    std::vector<PropertySpec> properties;
    std::optional<unsigned> max_depth;   // nullopt = unlimited
    std::size_t degree_cap = 5000;
    std::size_t k = 20;
    double tau = 0.5;
    ReferenceMode reference_mode = ReferenceMode::KeepOnly;
    ClassifierMode mode = ClassifierMode::Analogy;
    std::set<EntityId> whitelist;

    friend bool operator==(const ExtractionTask&, const ExtractionTask&) = default;
};

struct Diagnostic {
    enum class Severity : std::uint8_t { Warning, Fatal };
    Severity severity = Severity::Warning;
    std::string message;
};

bool has_fatal(std::span<const Diagnostic> diagnostics);

// Dedups seeds/properties in place (first occurrence wins) and clamps k to the
// reference count; empty seeds or properties are fatal.
std::vector<Diagnostic> validate(ExtractionTask& task, std::size_t reference_count);

enum class NodeDecision : std::uint8_t { Seed, Kept, Pruned, Unembedded };

std::string_view to_string(NodeDecision d) noexcept;

struct VoteTally {
    std::size_t keep = 0;       // references voting keep
    std::size_t cast = 0;       // references whose quadruple cleared tau
    std::size_t selected = 0;   // references consulted

    friend bool operator==(const VoteTally&, const VoteTally&) = default;
};

struct DecisionOutcome {
    Decision decision = Decision::Prune;
    VoteTally votes;
};

// Analogical extrapolation: select the k references whose seed embedding is closest
// to `seed`, score ref.seed : ref.neighbor :: seed : neighbor for each, and vote.
//   KeepOnly:    only Keep references are consulted; Keep iff more than half of the
//                selected references clear tau.
//   BothClasses: every reference clearing tau votes its own decision; Keep iff keep
//                votes outnumber prune votes.
// Ties and zero votes resolve to Prune. Throws MissingEmbedding.
DecisionOutcome decide(const QuadrupleScorer& scorer, const EmbeddingTable& table,
                       std::span<const DecisionExample> references, EntityId seed, EntityId neighbor,
                       double tau, std::size_t k, ReferenceMode mode);

struct Via {
    EntityId parent;
    PropertySpec spec;

    friend bool operator==(const Via&, const Via&) = default;
};

struct DecisionRecord {
    EntityId entity;
    NodeDecision decision = NodeDecision::Seed;
    unsigned depth = 0;
    std::optional<Via> via;       // empty for seeds
    EntityId root;                // the seed this node was reached from
    std::optional<VoteTally> votes;

    friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

// An edge as traversed: `source` was being expanded, `target` was discovered via `spec`.
struct ResultEdge {
    EntityId source;
    PropertySpec spec;
    EntityId target;

    Triple canonical() const { return canonical_triple(source, spec, target); }
    friend bool operator==(const ResultEdge&, const ResultEdge&) = default;
};

struct ExtractionStats {
    std::size_t visited = 0;            // entities whose neighbourhood was expanded
    std::size_t kept = 0;
    std::size_t pruned = 0;
    std::size_t unembedded = 0;
    std::size_t truncated_fetches = 0;
    std::chrono::nanoseconds wall_time{0};
};

struct ExtractionResult {
    ExtractionTask task;
    std::vector<ResultEdge> edges;               // discovery order, one per canonical triple
    std::map<EntityId, DecisionRecord> records;
    std::map<EntityId, Label> labels;
    ExtractionStats stats;
};

struct NeighborBatch {
    std::vector<Neighbor> neighbors;
    bool truncated = false;
};

// Where neighbourhoods come from: a local snapshot or a live endpoint.
class NeighborSource {
public:
    virtual ~NeighborSource() = default;
    virtual NeighborBatch neighbors(EntityId entity, std::span<const PropertySpec> specs) = 0;
    virtual std::optional<Label> label(EntityId entity) = 0;
};

class SnapshotSource final : public NeighborSource {
public:
    explicit SnapshotSource(const AdjacencySnapshot& snapshot) : snapshot_(snapshot) {}
    NeighborBatch neighbors(EntityId entity, std::span<const PropertySpec> specs) override;
    std::optional<Label> label(EntityId entity) override;

private:
    const AdjacencySnapshot& snapshot_;
};

struct AnalogyResources {
    QuadrupleScorer scorer;
    const EmbeddingTable* table = nullptr;
    std::span<const DecisionExample> references;
};

struct Progress {
    std::size_t visited = 0;
    unsigned depth = 0;
};
using ProgressFn = std::function<void(const Progress&)>;

// Raised when a live source fails mid-run; carries what was extracted so far.
class PartialExtraction : public Error {
public:
    PartialExtraction(const Error& cause, ExtractionResult partial)
        : Error(cause.kind(), std::string("extraction interrupted: ") + cause.what()),
          partial_(std::move(partial)) {}
    const ExtractionResult& partial() const noexcept { return partial_; }

private:
    ExtractionResult partial_;
};

// Throws ValidationError for an invalid task, SeedUnembedded (Analogy mode) and
// PartialExtraction when the source fails.
ExtractionResult extract(const ExtractionTask& task, NeighborSource& source,
                         const AnalogyResources* analogy = nullptr, const ProgressFn& progress = {});

}  // namespace kgp
