#pragma once
// Wikidata-compatible endpoint client, on-disk fragment cache and dump loading.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "kgprune/engine.hpp"
#include "kgprune/kg_store.hpp"

namespace kgp {

struct EndpointConfig {
    std::string base_url = "https://www.wikidata.org";
    std::string sparql_url = "https://query.wikidata.org/sparql";
    double requests_per_second = 5.0;
    unsigned retry_limit = 3;
    std::chrono::milliseconds timeout{15000};
    std::chrono::milliseconds backoff{500};   // doubled on every retry
    std::string user_agent = "kgprune/0.1 (subgraph extraction)";

    // Defaults overridden by KGP_ENDPOINT, KGP_SPARQL_ENDPOINT and KGP_RPS_CAP.
    static EndpointConfig from_env();
    // Throws ValidationError.
    void check() const;
};

// Truthy entity-valued claims of one entity.
struct EntityFragment {
    EntityId root;
    std::vector<Triple> triples;          // subject == root, sorted, unique
    std::map<EntityId, Label> labels;

    GraphFragment graph() const { return {triples, labels}; }
    friend bool operator==(const EntityFragment&, const EntityFragment&) = default;
};

// Parses a Special:EntityData JSON document. Only best-rank statements with item values
// are kept: preferred ones when a property has any, normal ones otherwise. A document
// answering for a redirect target is attributed to `requested`. Throws ParseError.
EntityFragment parse_entity_document(std::string_view json, EntityId requested);

// SPARQL JSON results: the `var` binding of every row that is an entity IRI.
std::vector<EntityId> parse_sparql_entities(std::string_view json, std::string_view var);

std::string inverse_query(EntityId object, std::uint64_t property, std::size_t limit);

// Spaces requests at least 1/rate apart, so any window of length w admits at most
// w * rate + 1 of them.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second);
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::steady_clock::duration interval_;
    std::chrono::steady_clock::time_point next_{};
};

// One JSON file per entity under `dir`. Unreadable entries are deleted and reported as misses.
class FragmentCache {
public:
    using Clock = std::chrono::system_clock;

    explicit FragmentCache(std::filesystem::path dir,
                           std::optional<std::chrono::seconds> staleness = std::nullopt);

    std::optional<EntityFragment> get(EntityId id) const;
    void put(const EntityFragment& fragment, Clock::time_point fetched_at = Clock::now());
    std::size_t evictions() const noexcept { return evictions_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path path_for(EntityId id) const;

    std::filesystem::path dir_;
    std::optional<std::chrono::seconds> staleness_;
    mutable std::shared_mutex mutex_;
    mutable std::size_t evictions_ = 0;
};

struct InverseNeighbors {
    std::vector<Triple> triples;   // (x, property, object), sorted by x
    bool truncated = false;
};

// Shareable across threads; the rate limiter is the only point of contention.
class WikidataClient {
public:
    explicit WikidataClient(EndpointConfig config, FragmentCache* cache = nullptr);

    // Cache first. Throws NotFound, TransportError, QueryRefused, ParseError.
    EntityFragment fetch_entity(EntityId id);
    // Up to `cap` subjects x with (x, property, object). Throws TransportError, QueryRefused.
    InverseNeighbors fetch_inverse_neighbors(EntityId object, std::uint64_t property, std::size_t cap);

    std::size_t requests_made() const noexcept;
    const EndpointConfig& config() const noexcept { return config_; }

private:
    std::string get(const std::string& url, bool* not_found);

    EndpointConfig config_;
    FragmentCache* cache_;
    RateLimiter limiter_;
    mutable std::mutex stats_mutex_;
    std::size_t requests_ = 0;
};

// Live-mode neighbour source. Entities the endpoint does not know have no neighbours.
class LiveSource final : public NeighborSource {
public:
    explicit LiveSource(WikidataClient& client, std::size_t inverse_cap = 5000, bool fetch_labels = true);

    NeighborBatch neighbors(EntityId entity, std::span<const PropertySpec> specs) override;
    std::optional<Label> label(EntityId entity) override;

private:
    const EntityFragment* fragment(EntityId entity);

    WikidataClient& client_;
    std::size_t inverse_cap_;
    bool fetch_labels_;
    std::map<EntityId, std::optional<EntityFragment>> fragments_;
};

// Reads a snapshot file. An empty result carries an "EmptySnapshot" warning. Throws IoError.
SnapshotReadResult load_dump(const std::filesystem::path& path);

}  // namespace kgp
