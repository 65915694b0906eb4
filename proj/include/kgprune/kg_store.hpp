#pragma once
// Immutable local knowledge-graph snapshot with direction-aware lookup.

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgp {

// Wikidata item identifier "Q<N>".
struct EntityId {
    std::uint64_t value = 0;

    constexpr EntityId() = default;
    constexpr explicit EntityId(std::uint64_t v) : value(v) {}
    friend constexpr auto operator<=>(EntityId, EntityId) = default;
};

enum class Direction : std::uint8_t { Direct, Inverse };

// A property to traverse. "P<N>" follows stored edges, "(-)P<N>" follows them backwards.
struct PropertySpec {
    std::uint64_t property = 0;
    Direction direction = Direction::Direct;

    friend constexpr auto operator<=>(const PropertySpec&, const PropertySpec&) = default;
};

struct Triple {
    EntityId subject;
    std::uint64_t property = 0;
    EntityId object;

    friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

struct Label {
    std::string text;
    std::string language = "en";
    std::string description;

    friend bool operator==(const Label&, const Label&) = default;
};

struct Neighbor {
    PropertySpec spec;
    EntityId entity;

    friend constexpr auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

// Throws Error{MalformedId}. Surrounding whitespace is tolerated.
EntityId parse_entity_id(std::string_view text);
PropertySpec parse_property_spec(std::string_view text);
// Bare "P<N>" property number, without a direction marker.
std::uint64_t parse_property_number(std::string_view text);

std::string to_string(EntityId id);
std::string to_string(const PropertySpec& spec);
std::string property_text(std::uint64_t property);

// The stored orientation of an edge discovered from `from` via `spec`.
Triple canonical_triple(EntityId from, const PropertySpec& spec, EntityId to);

struct GraphFragment {
    std::vector<Triple> triples;
    std::map<EntityId, Label> labels;
};

class AdjacencySnapshot {
public:
    AdjacencySnapshot() = default;
    explicit AdjacencySnapshot(std::vector<Triple> triples, std::map<EntityId, Label> labels = {});

    // Sorted by (subject, property, object), duplicates removed.
    std::span<const Triple> triples() const noexcept { return forward_; }
    const std::map<EntityId, Label>& labels() const noexcept { return labels_; }
    const Label* label(EntityId id) const;
    std::size_t size() const noexcept { return forward_.size(); }
    bool empty() const noexcept { return forward_.empty(); }

    // Ordered by property number, then Direct before Inverse, then neighbour id.
    std::vector<Neighbor> neighbors(EntityId entity, std::span<const PropertySpec> specs) const;

    friend bool operator==(const AdjacencySnapshot& a, const AdjacencySnapshot& b) {
        return a.forward_ == b.forward_ && a.labels_ == b.labels_;
    }

private:
    std::vector<Triple> forward_;   // (subject, property, object)
    std::vector<Triple> inverse_;   // same triples sorted by (object, property, subject)
    std::map<EntityId, Label> labels_;
};

// Union of triples and labels; labels from `fragment` replace existing ones.
AdjacencySnapshot merge(const AdjacencySnapshot& snapshot, const GraphFragment& fragment);

struct SnapshotReadResult {
    AdjacencySnapshot snapshot;
    std::size_t skipped_lines = 0;
    std::vector<std::string> warnings;
};

// N-Triples subset: wd:Q.. wdt:P.. wd:Q.. plus rdfs:label / schema:description lines.
SnapshotReadResult read_snapshot(std::istream& in);
void write_snapshot(std::ostream& out, const AdjacencySnapshot& snapshot);

}  // namespace kgp

template <>
struct std::hash<kgp::EntityId> {
    std::size_t operator()(kgp::EntityId id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
