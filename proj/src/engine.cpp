#include "kgprune/engine.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "kgprune/simd.hpp"

namespace kgp {

std::string_view to_string(NodeDecision d) noexcept {
    switch (d) {
        case NodeDecision::Seed: return "seed";
        case NodeDecision::Kept: return "kept";
        case NodeDecision::Pruned: return "pruned";
        case NodeDecision::Unembedded: return "unembedded";
    }
    return "pruned";
}

bool has_fatal(std::span<const Diagnostic> diagnostics) {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Fatal; });
}

namespace {

template <typename T>
std::vector<T> dedup_preserving_order(const std::vector<T>& in, std::vector<T>& removed) {
    std::vector<T> out;
    std::set<T> seen;
    for (const T& v : in) {
        if (seen.insert(v).second) out.push_back(v);
        else removed.push_back(v);
    }
    return out;
}

Diagnostic warning(std::string m) { return {Diagnostic::Severity::Warning, std::move(m)}; }
Diagnostic fatal(std::string m) { return {Diagnostic::Severity::Fatal, std::move(m)}; }

}  // namespace

std::vector<Diagnostic> validate(ExtractionTask& task, std::size_t reference_count) {
    std::vector<Diagnostic> out;
    if (task.seeds.empty()) out.push_back(fatal("no seed entities given"));
    if (task.properties.empty()) out.push_back(fatal("no properties to traverse given"));

    std::vector<EntityId> dup_seeds;
    task.seeds = dedup_preserving_order(task.seeds, dup_seeds);
    if (!dup_seeds.empty()) {
        std::string list;
        for (EntityId e : dup_seeds) list += (list.empty() ? "" : ", ") + to_string(e);
        out.push_back(warning(std::to_string(dup_seeds.size()) + " duplicate seed(s) ignored: " + list));
    }
    std::vector<PropertySpec> dup_props;
    task.properties = dedup_preserving_order(task.properties, dup_props);
    if (!dup_props.empty()) {
        std::string list;
        for (const auto& p : dup_props) list += (list.empty() ? "" : ", ") + to_string(p);
        out.push_back(warning(std::to_string(dup_props.size()) + " duplicate property spec(s) ignored: " + list));
    }

    if (task.max_depth && *task.max_depth == 0) out.push_back(fatal("max depth must be positive"));
    if (task.degree_cap == 0) out.push_back(fatal("degree cap must be positive"));
    if (task.k == 0) out.push_back(fatal("reference count k must be positive"));
    if (!(task.tau > 0.0 && task.tau < 1.0)) out.push_back(fatal("decision threshold tau must lie in (0, 1)"));

    if (task.mode == ClassifierMode::Analogy) {
        if (reference_count == 0) {
            out.push_back(fatal("analogy mode needs at least one reference decision"));
        } else if (task.k > reference_count) {
            out.push_back(warning("k = " + std::to_string(task.k) + " exceeds the " +
                                  std::to_string(reference_count) + " available references; clamped"));
            task.k = reference_count;
        }
    }
    if (task.mode == ClassifierMode::Whitelist && task.whitelist.empty())
        out.push_back(warning("whitelist mode with an empty whitelist prunes every neighbour"));
    return out;
}

namespace {

std::vector<const DecisionExample*> select_references(const EmbeddingTable& table,
                                                      std::span<const DecisionExample> references,
                                                      EntityId seed, std::size_t k, ReferenceMode mode) {
    const auto query = table.entity(seed);
    struct Candidate {
        double distance;
        const DecisionExample* ref;
    };
    std::vector<Candidate> candidates;
    for (const DecisionExample& ref : references) {
        if (mode == ReferenceMode::KeepOnly && ref.decision != Decision::Keep) continue;
        const auto s = table.entity_index(ref.seed);
        if (!s || !table.has_entity(ref.neighbor)) continue;
        candidates.push_back({simd::squared_distance(query, table.entity_row(*s)), &ref});
    }
    const std::size_t take = std::min(k, candidates.size());
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.ref->seed != b.ref->seed) return a.ref->seed < b.ref->seed;
        return a.ref->neighbor < b.ref->neighbor;
    });
    std::vector<const DecisionExample*> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(candidates[i].ref);
    return out;
}

DecisionOutcome vote(const QuadrupleScorer& scorer, const EmbeddingTable& table,
                     std::span<const DecisionExample* const> selected, EntityId seed, EntityId neighbor,
                     double tau, ReferenceMode mode) {
    const auto c = table.entity(seed);
    const auto d = table.entity(neighbor);
    DecisionOutcome out;
    out.votes.selected = selected.size();
    for (const DecisionExample* ref : selected) {
        const double p = scorer(Quadruple(table.entity(ref->seed), table.entity(ref->neighbor), c, d));
        if (!(p > tau)) continue;
        ++out.votes.cast;
        if (mode == ReferenceMode::KeepOnly || ref->decision == Decision::Keep) ++out.votes.keep;
    }
    const bool keep = mode == ReferenceMode::KeepOnly
                          ? 2 * out.votes.keep > out.votes.selected
                          : out.votes.keep > out.votes.cast - out.votes.keep;
    out.decision = keep ? Decision::Keep : Decision::Prune;
    return out;
}

}  // namespace

DecisionOutcome decide(const QuadrupleScorer& scorer, const EmbeddingTable& table,
                       std::span<const DecisionExample> references, EntityId seed, EntityId neighbor,
                       double tau, std::size_t k, ReferenceMode mode) {
    table.entity(neighbor);   // MissingEmbedding before any scoring
    const auto selected = select_references(table, references, seed, k, mode);
    return vote(scorer, table, selected, seed, neighbor, tau, mode);
}

NeighborBatch SnapshotSource::neighbors(EntityId entity, std::span<const PropertySpec> specs) {
    return NeighborBatch{snapshot_.neighbors(entity, specs), false};
}

std::optional<Label> SnapshotSource::label(EntityId entity) {
    if (const Label* l = snapshot_.label(entity)) return *l;
    return std::nullopt;
}

ExtractionResult extract(const ExtractionTask& input, NeighborSource& source,
                         const AnalogyResources* analogy, const ProgressFn& progress) {
    const auto started = std::chrono::steady_clock::now();
    ExtractionResult result;
    result.task = input;
    ExtractionTask& task = result.task;

    const bool analogy_mode = task.mode == ClassifierMode::Analogy;
    if (analogy_mode && (analogy == nullptr || analogy->table == nullptr || !analogy->scorer))
        fail(ErrorKind::ValidationError, "analogy mode requires a model, embeddings and references");
    const auto diagnostics = validate(task, analogy_mode ? analogy->references.size() : 0);
    if (has_fatal(diagnostics)) {
        std::string msg;
        for (const auto& d : diagnostics)
            if (d.severity == Diagnostic::Severity::Fatal) msg += (msg.empty() ? "" : "; ") + d.message;
        fail(ErrorKind::ValidationError, msg);
    }
    if (analogy_mode) {
        std::string missing;
        for (EntityId s : task.seeds)
            if (!analogy->table->has_entity(s)) missing += (missing.empty() ? "" : ", ") + to_string(s);
        if (!missing.empty()) fail(ErrorKind::SeedUnembedded, "seed entities without embeddings: " + missing);
    }

    for (EntityId s : task.seeds)
        result.records.emplace(s, DecisionRecord{s, NodeDecision::Seed, 0, std::nullopt, s, std::nullopt});

    std::unordered_map<EntityId, std::vector<const DecisionExample*>> selections;
    auto classify = [&](EntityId root, EntityId neighbor, DecisionRecord& record) {
        switch (task.mode) {
            case ClassifierMode::KeepAll:
                record.decision = NodeDecision::Kept;
                return;
            case ClassifierMode::Whitelist:
                record.decision = task.whitelist.contains(neighbor) ? NodeDecision::Kept : NodeDecision::Pruned;
                return;
            case ClassifierMode::Analogy:
                break;
        }
        if (!analogy->table->has_entity(neighbor)) {
            record.decision = NodeDecision::Unembedded;
            return;
        }
        auto it = selections.find(root);
        if (it == selections.end())
            it = selections
                     .emplace(root, select_references(*analogy->table, analogy->references, root, task.k,
                                                      task.reference_mode))
                     .first;
        const auto outcome =
            vote(analogy->scorer, *analogy->table, it->second, root, neighbor, task.tau, task.reference_mode);
        record.decision = outcome.decision == Decision::Keep ? NodeDecision::Kept : NodeDecision::Pruned;
        record.votes = outcome.votes;
    };

    std::set<Triple> seen_triples;
    std::vector<EntityId> frontier = task.seeds;
    unsigned depth = 0;
    try {
        while (!frontier.empty() && (!task.max_depth || depth < *task.max_depth)) {
            std::vector<EntityId> next;
            for (EntityId current : frontier) {
                NeighborBatch batch = source.neighbors(current, task.properties);
                ++result.stats.visited;
                bool truncated = batch.truncated;
                if (batch.neighbors.size() > task.degree_cap) {
                    batch.neighbors.resize(task.degree_cap);
                    truncated = true;
                }
                if (truncated) ++result.stats.truncated_fetches;
                const EntityId root = result.records.at(current).root;
                for (const Neighbor& n : batch.neighbors) {
                    const ResultEdge edge{current, n.spec, n.entity};
                    if (seen_triples.insert(edge.canonical()).second) result.edges.push_back(edge);
                    if (result.records.contains(n.entity)) continue;
                    DecisionRecord record{n.entity, NodeDecision::Pruned, depth + 1, Via{current, n.spec}, root,
                                          std::nullopt};
                    classify(root, n.entity, record);
                    switch (record.decision) {
                        case NodeDecision::Kept:
                            ++result.stats.kept;
                            next.push_back(n.entity);
                            break;
                        case NodeDecision::Pruned: ++result.stats.pruned; break;
                        case NodeDecision::Unembedded: ++result.stats.unembedded; break;
                        case NodeDecision::Seed: break;
                    }
                    result.records.emplace(n.entity, std::move(record));
                }
                if (progress) progress(Progress{result.stats.visited, depth});
            }
            frontier = std::move(next);
            ++depth;
        }
        for (const auto& [id, record] : result.records)
            if (auto label = source.label(id)) result.labels.emplace(id, std::move(*label));
    } catch (const PartialExtraction&) {
        throw;
    } catch (const Error& e) {
        result.stats.wall_time = std::chrono::steady_clock::now() - started;
        throw PartialExtraction(e, std::move(result));
    }
    result.stats.wall_time = std::chrono::steady_clock::now() - started;
    return result;
}

}  // namespace kgp
