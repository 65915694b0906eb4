#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "kgprune/error.hpp"
#include "kgprune/ingest.hpp"
#include "kgprune/rdf.hpp"

namespace kgp {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) {
    fail(ErrorKind::ParseError, "entity document: " + what);
}

const json& member(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) bad(where + " is not an object");
    const auto it = obj.find(key);
    if (it == obj.end()) bad(where + " has no '" + key + "'");
    return *it;
}

std::optional<std::string> english(const json& entity, const char* key) {
    const auto it = entity.find(key);
    if (it == entity.end() || !it->is_object()) return std::nullopt;
    const auto en = it->find("en");
    if (en == it->end() || !en->is_object()) return std::nullopt;
    const auto value = en->find("value");
    if (value == en->end() || !value->is_string()) return std::nullopt;
    return value->get<std::string>();
}

std::optional<EntityId> item_value(const json& statement) {
    const auto snak = statement.find("mainsnak");
    if (snak == statement.end() || !snak->is_object()) return std::nullopt;
    if (snak->value("snaktype", "") != "value") return std::nullopt;
    const auto dv = snak->find("datavalue");
    if (dv == snak->end() || !dv->is_object() || dv->value("type", "") != "wikibase-entityid")
        return std::nullopt;
    const auto value = dv->find("value");
    if (value == dv->end() || !value->is_object()) return std::nullopt;
    if (value->value("entity-type", "item") != "item") return std::nullopt;
    if (const auto id = value->find("id"); id != value->end() && id->is_string()) {
        try {
            return parse_entity_id(id->get<std::string>());
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    if (const auto n = value->find("numeric-id"); n != value->end() && n->is_number_unsigned()) {
        const auto v = n->get<std::uint64_t>();
        if (v > 0) return EntityId{v};
    }
    return std::nullopt;
}

}  // namespace

EntityFragment parse_entity_document(std::string_view text, EntityId requested) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        bad(std::string("invalid JSON: ") + e.what());
    }
    const json& entities = member(doc, "entities", "document");
    if (!entities.is_object() || entities.empty()) bad("'entities' is empty");

    const std::string key = to_string(requested);
    auto it = entities.find(key);
    if (it == entities.end()) {
        if (entities.size() != 1) bad("no entry for " + key);
        it = entities.begin();   // redirect: the document is keyed by the target id
    }
    const json& entity = *it;
    if (!entity.is_object()) bad("entry for " + key + " is not an object");
    if (entity.contains("missing")) fail(ErrorKind::NotFound, key + " does not exist");

    EntityFragment fragment;
    fragment.root = requested;

    if (auto label = english(entity, "labels")) {
        Label l;
        l.text = std::move(*label);
        l.description = english(entity, "descriptions").value_or("");
        fragment.labels.emplace(requested, std::move(l));
    }

    const auto claims = entity.find("claims");
    if (claims != entity.end()) {
        if (!claims->is_object()) bad("'claims' is not an object");
        for (const auto& [pid, statements] : claims->items()) {
            std::uint64_t property = 0;
            try {
                property = parse_property_number(pid);
            } catch (const Error&) {
                bad("claim key '" + pid + "' is not a property id");
            }
            if (!statements.is_array()) bad("claims for " + pid + " are not a list");
            const bool has_preferred = std::any_of(statements.begin(), statements.end(), [](const json& s) {
                return s.is_object() && s.value("rank", "normal") == "preferred";
            });
            const std::string best = has_preferred ? "preferred" : "normal";
            for (const auto& statement : statements) {
                if (!statement.is_object()) bad("statement under " + pid + " is not an object");
                if (statement.value("rank", "normal") != best) continue;
                if (auto object = item_value(statement))
                    fragment.triples.push_back({requested, property, *object});
            }
        }
    }
    std::sort(fragment.triples.begin(), fragment.triples.end());
    fragment.triples.erase(std::unique(fragment.triples.begin(), fragment.triples.end()), fragment.triples.end());
    return fragment;
}

std::vector<EntityId> parse_sparql_entities(std::string_view text, std::string_view var) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::ParseError, std::string("SPARQL results: invalid JSON: ") + e.what());
    }
    const auto results = doc.find("results");
    if (!doc.is_object() || results == doc.end() || !results->is_object())
        fail(ErrorKind::ParseError, "SPARQL results: missing 'results'");
    const auto bindings = results->find("bindings");
    if (bindings == results->end() || !bindings->is_array())
        fail(ErrorKind::ParseError, "SPARQL results: missing 'results.bindings'");

    std::vector<EntityId> out;
    for (const auto& row : *bindings) {
        if (!row.is_object()) continue;
        const auto cell = row.find(std::string(var));
        if (cell == row.end() || !cell->is_object() || cell->value("type", "") != "uri") continue;
        if (auto id = rdf::entity_from_iri(cell->value("value", ""))) out.push_back(*id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string inverse_query(EntityId object, std::uint64_t property, std::size_t limit) {
    std::ostringstream q;
    q << "SELECT ?s WHERE { ?s <" << rdf::property_iri(property) << "> <" << rdf::entity_iri(object)
      << "> . } ORDER BY ?s LIMIT " << limit;
    return q.str();
}

}  // namespace kgp
