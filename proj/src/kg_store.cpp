#include "kgprune/kg_store.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include "kgprune/error.hpp"
#include "kgprune/rdf.hpp"

namespace kgp {
namespace {

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\v\f";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

// Strict "<prefix><digits>" with no leading zero and value >= 1.
bool parse_prefixed_number(std::string_view text, char prefix, std::uint64_t& out) {
    if (text.size() < 2 || text.front() != prefix) return false;
    const std::string_view digits = text.substr(1);
    if (digits.front() < '1' || digits.front() > '9') return false;
    for (char c : digits)
        if (c < '0' || c > '9') return false;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    return ec == std::errc{} && ptr == digits.data() + digits.size();
}

std::string quoted(std::string_view s) {
    return "'" + std::string(s) + "'";
}

bool by_inverse_key(const Triple& a, const Triple& b) {
    return std::tie(a.object, a.property, a.subject) < std::tie(b.object, b.property, b.subject);
}

}  // namespace

EntityId parse_entity_id(std::string_view text) {
    const std::string_view t = trim(text);
    std::uint64_t value = 0;
    if (!parse_prefixed_number(t, 'Q', value))
        fail(ErrorKind::MalformedId, "malformed entity id " + quoted(t) + " (expected Q<number>)");
    return EntityId{value};
}

std::uint64_t parse_property_number(std::string_view text) {
    const std::string_view t = trim(text);
    std::uint64_t value = 0;
    if (!parse_prefixed_number(t, 'P', value))
        fail(ErrorKind::MalformedId, "malformed property id " + quoted(t) + " (expected P<number>)");
    return value;
}

PropertySpec parse_property_spec(std::string_view text) {
    std::string_view t = trim(text);
    Direction direction = Direction::Direct;
    if (t.starts_with("(-)")) {
        direction = Direction::Inverse;
        t.remove_prefix(3);
    }
    std::uint64_t value = 0;
    if (!parse_prefixed_number(t, 'P', value))
        fail(ErrorKind::MalformedId,
             "malformed property spec " + quoted(trim(text)) + " (expected P<number> or (-)P<number>)");
    return PropertySpec{value, direction};
}

std::string to_string(EntityId id) {
    return "Q" + std::to_string(id.value);
}

std::string property_text(std::uint64_t property) {
    return "P" + std::to_string(property);
}

std::string to_string(const PropertySpec& spec) {
    return (spec.direction == Direction::Inverse ? "(-)" : "") + property_text(spec.property);
}

Triple canonical_triple(EntityId from, const PropertySpec& spec, EntityId to) {
    if (spec.direction == Direction::Direct) return Triple{from, spec.property, to};
    return Triple{to, spec.property, from};
}

AdjacencySnapshot::AdjacencySnapshot(std::vector<Triple> triples, std::map<EntityId, Label> labels)
    : forward_(std::move(triples)), labels_(std::move(labels)) {
    std::sort(forward_.begin(), forward_.end());
    forward_.erase(std::unique(forward_.begin(), forward_.end()), forward_.end());
    inverse_ = forward_;
    std::sort(inverse_.begin(), inverse_.end(), by_inverse_key);
}

const Label* AdjacencySnapshot::label(EntityId id) const {
    const auto it = labels_.find(id);
    return it == labels_.end() ? nullptr : &it->second;
}

std::vector<Neighbor> AdjacencySnapshot::neighbors(EntityId entity,
                                                   std::span<const PropertySpec> specs) const {
    std::vector<PropertySpec> ordered(specs.begin(), specs.end());
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

    std::vector<Neighbor> out;
    for (const PropertySpec& spec : ordered) {
        if (spec.direction == Direction::Direct) {
            const Triple lo{entity, spec.property, EntityId{0}};
            auto it = std::lower_bound(forward_.begin(), forward_.end(), lo);
            for (; it != forward_.end() && it->subject == entity && it->property == spec.property; ++it)
                out.push_back(Neighbor{spec, it->object});
        } else {
            const Triple lo{EntityId{0}, spec.property, entity};
            auto it = std::lower_bound(inverse_.begin(), inverse_.end(), lo, by_inverse_key);
            for (; it != inverse_.end() && it->object == entity && it->property == spec.property; ++it)
                out.push_back(Neighbor{spec, it->subject});
        }
    }
    return out;
}

AdjacencySnapshot merge(const AdjacencySnapshot& snapshot, const GraphFragment& fragment) {
    std::vector<Triple> triples(snapshot.triples().begin(), snapshot.triples().end());
    triples.insert(triples.end(), fragment.triples.begin(), fragment.triples.end());
    std::map<EntityId, Label> labels = snapshot.labels();
    for (const auto& [id, label] : fragment.labels) labels[id] = label;
    return AdjacencySnapshot(std::move(triples), std::move(labels));
}

SnapshotReadResult read_snapshot(std::istream& in) {
    SnapshotReadResult result;
    std::vector<Triple> triples;
    std::map<EntityId, Label> labels;
    std::string line;
    std::size_t line_no = 0;

    auto skip = [&](const std::string& why) {
        ++result.skipped_lines;
        result.warnings.push_back("line " + std::to_string(line_no) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::optional<rdf::Statement> st;
        try {
            st = rdf::parse_line(line);
        } catch (const Error& e) {
            skip(e.what());
            continue;
        }
        if (!st) continue;
        if (st->subject.kind != rdf::Term::Kind::Iri || st->predicate.kind != rdf::Term::Kind::Iri) {
            skip("subject/predicate is not an IRI");
            continue;
        }
        const auto subject = rdf::entity_from_iri(st->subject.value);
        if (!subject) {
            skip("subject is not a Wikidata entity IRI");
            continue;
        }
        if (const auto property = rdf::property_from_iri(st->predicate.value)) {
            const auto object = st->object.kind == rdf::Term::Kind::Iri
                                    ? rdf::entity_from_iri(st->object.value)
                                    : std::nullopt;
            if (!object) {
                skip("object is not a Wikidata entity IRI");
                continue;
            }
            triples.push_back(Triple{*subject, *property, *object});
            continue;
        }
        const bool is_label = st->predicate.value == rdf::kRdfsLabel;
        const bool is_description = st->predicate.value == rdf::kSchemaDescription;
        if ((is_label || is_description) && st->object.kind == rdf::Term::Kind::Literal) {
            Label& label = labels[*subject];
            const std::string& lang = st->object.language;
            // English wins; otherwise the first language seen is kept.
            if (is_label && (label.text.empty() || (lang == "en" && label.language != "en"))) {
                label.text = st->object.value;
                label.language = lang.empty() ? "en" : lang;
            } else if (is_description && (label.description.empty() || lang == "en")) {
                label.description = st->object.value;
            }
            continue;
        }
        skip("unsupported predicate <" + st->predicate.value + ">");
    }
    result.snapshot = AdjacencySnapshot(std::move(triples), std::move(labels));
    return result;
}

void write_snapshot(std::ostream& out, const AdjacencySnapshot& snapshot) {
    for (const Triple& t : snapshot.triples()) out << rdf::triple_line(t) << '\n';
    for (const auto& [id, label] : snapshot.labels()) {
        if (!label.text.empty()) out << rdf::label_line(id, label) << '\n';
        if (!label.description.empty()) out << rdf::description_line(id, label) << '\n';
    }
}

}  // namespace kgp
