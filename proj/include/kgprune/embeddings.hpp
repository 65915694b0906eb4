#pragma once
// Entity and relation vector tables, TransE scoring and the KGPE file format.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgprune/kg_store.hpp"

namespace kgp {

enum class NormOrder : std::uint8_t { L1, L2 };

// Rows are stored contiguously in insertion order; ids map to row indices.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dimension = 200);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t entity_count() const noexcept { return entity_ids_.size(); }
    std::size_t relation_count() const noexcept { return relation_ids_.size(); }

    bool has_entity(EntityId id) const { return entity_index_.contains(id); }
    bool has_relation(std::uint64_t property) const { return relation_index_.contains(property); }

    std::optional<std::size_t> entity_index(EntityId id) const;
    std::optional<std::size_t> relation_index(std::uint64_t property) const;

    // Throw Error{MissingEmbedding}.
    std::span<const double> entity(EntityId id) const;
    std::span<const double> relation(std::uint64_t property) const;

    // Insert or overwrite. Throws DimensionMismatch on wrong length, FormatError on non-finite input.
    void set_entity(EntityId id, std::span<const double> values);
    void set_relation(std::uint64_t property, std::span<const double> values);

    std::span<const EntityId> entity_ids() const noexcept { return entity_ids_; }
    std::span<const std::uint64_t> relation_ids() const noexcept { return relation_ids_; }

    std::span<double> entity_row(std::size_t index);
    std::span<const double> entity_row(std::size_t index) const;
    std::span<double> relation_row(std::size_t index);
    std::span<const double> relation_row(std::size_t index) const;

    // Bit-exact comparison of content, independent of insertion order.
    friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

private:
    std::size_t dimension_;
    std::vector<EntityId> entity_ids_;
    std::unordered_map<EntityId, std::size_t> entity_index_;
    std::vector<double> entity_data_;
    std::vector<std::uint64_t> relation_ids_;
    std::unordered_map<std::uint64_t, std::size_t> relation_index_;
    std::vector<double> relation_data_;
};

// Distance between v_h + v_r and v_t under the chosen norm.
double score(const EmbeddingTable& table, EntityId head, std::uint64_t relation, EntityId tail,
             NormOrder norm = NormOrder::L2);

// k closest embedded entities by Euclidean distance, ties broken by numeric id.
std::vector<std::pair<EntityId, double>> nearest(const EmbeddingTable& table, EntityId id,
                                                 std::size_t k);

void save_embeddings(std::ostream& out, const EmbeddingTable& table);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
// Throws IoError or FormatError (message carries the byte offset).
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace kgp
