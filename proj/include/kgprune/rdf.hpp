#pragma once
// Minimal N-Triples reading and writing for the Wikidata IRI families we use.

#include <optional>
#include <string>
#include <string_view>

#include "kgprune/kg_store.hpp"

namespace kgp::rdf {

inline constexpr std::string_view kEntityPrefix = "http://www.wikidata.org/entity/";
inline constexpr std::string_view kDirectPropertyPrefix = "http://www.wikidata.org/prop/direct/";
inline constexpr std::string_view kRdfsLabel = "http://www.w3.org/2000/01/rdf-schema#label";
inline constexpr std::string_view kSchemaDescription = "http://schema.org/description";

struct Term {
    enum class Kind { Iri, Literal, BlankNode };
    Kind kind = Kind::Iri;
    std::string value;      // IRI text, unescaped literal lexical form, or blank node label
    std::string language;   // literals only
    std::string datatype;   // literals only
};

struct Statement {
    Term subject;
    Term predicate;
    Term object;
};

// Blank and comment lines give nullopt; anything else malformed throws Error{ParseError}.
std::optional<Statement> parse_line(std::string_view line);

std::string escape_literal(std::string_view text);
std::string entity_iri(EntityId id);
std::string property_iri(std::uint64_t property);

// Parse "http://www.wikidata.org/entity/Q42" and friends; nullopt on any other IRI.
std::optional<EntityId> entity_from_iri(std::string_view iri);
std::optional<std::uint64_t> property_from_iri(std::string_view iri);

std::string triple_line(const Triple& triple);
std::string label_line(EntityId id, const Label& label);
std::string description_line(EntityId id, const Label& label);

}  // namespace kgp::rdf
