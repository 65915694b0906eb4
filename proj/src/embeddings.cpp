#include "kgprune/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "kgprune/error.hpp"
#include "kgprune/simd.hpp"

namespace kgp {
namespace {

void check_row(std::span<const double> values, std::size_t dimension) {
    if (values.size() != dimension)
        fail(ErrorKind::DimensionMismatch, "vector has " + std::to_string(values.size()) +
                                               " components, table dimension is " +
                                               std::to_string(dimension));
    for (double v : values)
        if (!std::isfinite(v)) fail(ErrorKind::FormatError, "non-finite embedding component");
}

template <typename Key, typename Map>
void upsert(std::vector<Key>& ids, Map& index, std::vector<double>& data, Key key,
            std::span<const double> values, std::size_t dimension) {
    const auto it = index.find(key);
    if (it != index.end()) {
        std::copy(values.begin(), values.end(), data.begin() + it->second * dimension);
        return;
    }
    index.emplace(key, ids.size());
    ids.push_back(key);
    data.insert(data.end(), values.begin(), values.end());
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

std::optional<std::size_t> EmbeddingTable::entity_index(EntityId id) const {
    const auto it = entity_index_.find(id);
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> EmbeddingTable::relation_index(std::uint64_t property) const {
    const auto it = relation_index_.find(property);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

std::span<const double> EmbeddingTable::entity(EntityId id) const {
    const auto idx = entity_index(id);
    if (!idx) fail(ErrorKind::MissingEmbedding, "no embedding for entity " + to_string(id));
    return entity_row(*idx);
}

std::span<const double> EmbeddingTable::relation(std::uint64_t property) const {
    const auto idx = relation_index(property);
    if (!idx) fail(ErrorKind::MissingEmbedding, "no embedding for property " + property_text(property));
    return relation_row(*idx);
}

void EmbeddingTable::set_entity(EntityId id, std::span<const double> values) {
    check_row(values, dimension_);
    upsert(entity_ids_, entity_index_, entity_data_, id, values, dimension_);
}

void EmbeddingTable::set_relation(std::uint64_t property, std::span<const double> values) {
    check_row(values, dimension_);
    upsert(relation_ids_, relation_index_, relation_data_, property, values, dimension_);
}

std::span<double> EmbeddingTable::entity_row(std::size_t index) {
    return {entity_data_.data() + index * dimension_, dimension_};
}

std::span<const double> EmbeddingTable::entity_row(std::size_t index) const {
    return {entity_data_.data() + index * dimension_, dimension_};
}

std::span<double> EmbeddingTable::relation_row(std::size_t index) {
    return {relation_data_.data() + index * dimension_, dimension_};
}

std::span<const double> EmbeddingTable::relation_row(std::size_t index) const {
    return {relation_data_.data() + index * dimension_, dimension_};
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    if (a.dimension_ != b.dimension_ || a.entity_count() != b.entity_count() ||
        a.relation_count() != b.relation_count())
        return false;
    const auto same_bits = [](std::span<const double> x, std::span<const double> y) {
        return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](double p, double q) {
            return std::bit_cast<std::uint64_t>(p) == std::bit_cast<std::uint64_t>(q);
        });
    };
    for (EntityId id : a.entity_ids_) {
        const auto j = b.entity_index(id);
        if (!j || !same_bits(a.entity(id), b.entity_row(*j))) return false;
    }
    for (std::uint64_t p : a.relation_ids_) {
        const auto j = b.relation_index(p);
        if (!j || !same_bits(a.relation(p), b.relation_row(*j))) return false;
    }
    return true;
}

double score(const EmbeddingTable& table, EntityId head, std::uint64_t relation, EntityId tail,
             NormOrder norm) {
    const auto h = table.entity(head);
    const auto r = table.relation(relation);
    const auto t = table.entity(tail);
    std::vector<double> residual(table.dimension());
    simd::translation_residual(h, r, t, residual);
    if (norm == NormOrder::L1) {
        const std::vector<double> zero(residual.size(), 0.0);
        return simd::l1_distance(residual, zero);
    }
    return std::sqrt(simd::sum_squares(residual));
}

std::vector<std::pair<EntityId, double>> nearest(const EmbeddingTable& table, EntityId id,
                                                 std::size_t k) {
    const auto query = table.entity(id);
    std::vector<std::pair<EntityId, double>> all;
    all.reserve(table.entity_count());
    for (std::size_t i = 0; i < table.entity_count(); ++i) {
        const EntityId other = table.entity_ids()[i];
        if (other == id) continue;
        all.emplace_back(other, std::sqrt(simd::squared_distance(query, table.entity_row(i))));
    }
    const std::size_t take = std::min(k, all.size());
    const auto closer = [](const auto& x, const auto& y) {
        return x.second != y.second ? x.second < y.second : x.first < y.first;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), closer);
    all.resize(take);
    return all;
}

// ---------------------------------------------------------------------------
// KGPE v1 text format

namespace {

void write_row(std::ostream& out, const std::string& key, std::span<const double> row) {
    out << key << '\t';
    char buf[32];
    for (std::size_t i = 0; i < row.size(); ++i) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, row[i]);
        if (i) out << ' ';
        out.write(buf, ptr - buf);
    }
    out << '\n';
}

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
    fail(ErrorKind::FormatError, "KGPE: " + what + " at byte offset " + std::to_string(offset));
}

}  // namespace

void save_embeddings(std::ostream& out, const EmbeddingTable& table) {
    out << "KGPE v1 " << table.dimension() << ' ' << table.entity_count() << ' '
        << table.relation_count() << '\n';
    std::vector<EntityId> entities(table.entity_ids().begin(), table.entity_ids().end());
    std::sort(entities.begin(), entities.end());
    for (EntityId id : entities) write_row(out, to_string(id), table.entity(id));
    std::vector<std::uint64_t> relations(table.relation_ids().begin(), table.relation_ids().end());
    std::sort(relations.begin(), relations.end());
    for (std::uint64_t p : relations) write_row(out, property_text(p), table.relation(p));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    save_embeddings(out, table);
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

EmbeddingTable load_embeddings(std::istream& in) {
    std::string line;
    std::size_t offset = 0;
    if (!std::getline(in, line)) format_error(0, "missing header");
    std::istringstream header(line);
    std::string magic, version;
    std::size_t dimension = 0, entities = 0, relations = 0;
    if (!(header >> magic >> version >> dimension >> entities >> relations) || magic != "KGPE" ||
        version != "v1" || dimension == 0)
        format_error(0, "bad header '" + line + "'");
    offset += line.size() + 1;

    EmbeddingTable table(dimension);
    std::vector<double> row(dimension);
    const std::size_t expected = entities + relations;
    for (std::size_t rec = 0; rec < expected; ++rec) {
        if (!std::getline(in, line)) format_error(offset, "truncated file: expected " +
                                                              std::to_string(expected) +
                                                              " records, found " + std::to_string(rec));
        if (in.eof()) format_error(offset + line.size(), "record not newline-terminated");
        const auto tab = line.find('\t');
        if (tab == std::string::npos) format_error(offset, "record without tab separator");
        const std::string_view key(line.data(), tab);
        const char* p = line.data() + tab + 1;
        const char* end = line.data() + line.size();
        for (std::size_t i = 0; i < dimension; ++i) {
            if (i > 0) {
                if (p >= end || *p != ' ') format_error(offset + (p - line.data()), "expected space");
                ++p;
            }
            const auto [next, ec] = std::from_chars(p, end, row[i]);
            if (ec != std::errc{} || !std::isfinite(row[i]))
                format_error(offset + (p - line.data()), "bad float");
            p = next;
        }
        if (p != end) format_error(offset + (p - line.data()), "trailing characters");
        try {
            if (rec < entities)
                table.set_entity(parse_entity_id(key), row);
            else
                table.set_relation(parse_property_number(key), row);
        } catch (const Error& e) {
            format_error(offset, e.what());
        }
        offset += line.size() + 1;
    }
    if (table.entity_count() != entities || table.relation_count() != relations)
        format_error(offset, "duplicate record keys");
    if (std::getline(in, line) && !line.empty()) format_error(offset, "unexpected trailing data");
    return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    return load_embeddings(in);
}

}  // namespace kgp
