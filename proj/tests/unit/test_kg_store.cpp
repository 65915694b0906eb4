#include <sstream>

#include "doctest.h"
#include "kgprune/error.hpp"
#include "kgprune/kg_store.hpp"
#include "kgprune/rdf.hpp"
#include "support/graphs.hpp"

using namespace kgp;

namespace {

PropertySpec direct(std::uint64_t p) { return {p, Direction::Direct}; }
PropertySpec inverse(std::uint64_t p) { return {p, Direction::Inverse}; }
Triple tr(std::uint64_t s, std::uint64_t p, std::uint64_t o) { return {EntityId{s}, p, EntityId{o}}; }

void check_malformed_entity(const char* text) {
    CAPTURE(text);
    try {
        parse_entity_id(text);
        FAIL("accepted malformed id");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedId);
    }
}

}  // namespace

TEST_CASE("entity ids parse in canonical Q form") {
    CHECK(parse_entity_id("Q18833") == EntityId{18833});
    CHECK(parse_entity_id("Q251") == EntityId{251});
    CHECK(parse_entity_id("  Q251\r") == EntityId{251});
    for (const char* bad : {"P31", "", "Q", "QX7", "q251", "Q0", "Q012", "Q12a", "Q 12",
                            "Q99999999999999999999999"})
        check_malformed_entity(bad);
}

TEST_CASE("property specs carry direction") {
    CHECK(parse_property_spec("P279") == direct(279));
    CHECK(parse_property_spec("(-)P279") == inverse(279));
    CHECK(parse_property_spec(" P31 ") == direct(31));
    for (const char* bad : {"(-)Q279", "Q31", "(-)", "(-) P31", "(+)P31", "p31", "P"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_property_spec(bad), Error);
    }
    CHECK(to_string(inverse(279)) == "(-)P279");
}

TEST_CASE("identifier text round-trips") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::uint64_t> n(1, std::numeric_limits<std::uint64_t>::max());
    for (int i = 0; i < 500; ++i) {
        const EntityId e{n(rng)};
        CHECK(parse_entity_id(to_string(e)) == e);
        const PropertySpec s{n(rng), i % 2 ? Direction::Inverse : Direction::Direct};
        CHECK(parse_property_spec(to_string(s)) == s);
    }
}

TEST_CASE("neighbors follow the direction rule") {
    SUBCASE("single direct edge") {
        AdjacencySnapshot s({tr(1, 31, 2)});
        const std::vector<PropertySpec> specs{direct(31)};
        const auto n = s.neighbors(EntityId{1}, specs);
        REQUIRE(n.size() == 1);
        CHECK(n[0] == Neighbor{direct(31), EntityId{2}});
    }
    SUBCASE("inverse lookup") {
        AdjacencySnapshot s({tr(1, 279, 2)});
        const std::vector<PropertySpec> specs{inverse(279)};
        const auto n = s.neighbors(EntityId{2}, specs);
        REQUIRE(n.size() == 1);
        CHECK(n[0] == Neighbor{inverse(279), EntityId{1}});
    }
    SUBCASE("mixed specs in canonical order") {
        AdjacencySnapshot s({tr(1, 279, 2), tr(3, 279, 2), tr(2, 31, 4)});
        const std::vector<PropertySpec> specs{inverse(279), direct(31)};
        const auto n = s.neighbors(EntityId{2}, specs);
        const std::vector<Neighbor> expected{{direct(31), EntityId{4}},
                                             {inverse(279), EntityId{1}},
                                             {inverse(279), EntityId{3}}};
        CHECK(n == expected);
    }
    SUBCASE("unknown entity") {
        AdjacencySnapshot s({tr(1, 31, 2)});
        const std::vector<PropertySpec> specs{direct(31), inverse(31)};
        CHECK(s.neighbors(EntityId{99}, specs).empty());
    }
}

TEST_CASE("neighbors agree with a brute-force scan on random snapshots") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 40; ++round) {
        const std::size_t nodes = 5 + rng() % 60;
        const auto triples = testing::random_triples(rng, nodes, rng() % 501, 4);
        const AdjacencySnapshot snap(triples);
        std::vector<PropertySpec> specs;
        for (std::uint64_t p = 1; p <= 4; ++p) {
            if (rng() % 2) specs.push_back(direct(p));
            if (rng() % 2) specs.push_back(inverse(p));
        }
        if (specs.empty()) specs.push_back(direct(1));
        for (std::uint64_t e = 1; e <= nodes; ++e) {
            const auto got = snap.neighbors(EntityId{e}, specs);
            CHECK(std::is_sorted(got.begin(), got.end()));
            std::set<std::pair<PropertySpec, EntityId>> got_set;
            for (const auto& n : got) got_set.insert({n.spec, n.entity});
            CHECK(got_set.size() == got.size());
            CHECK(got_set == testing::scan_neighbors(triples, EntityId{e}, specs));
        }
    }
}

TEST_CASE("direct adjacency inverted equals inverse adjacency") {
    std::mt19937_64 rng(5);
    const auto triples = testing::random_triples(rng, 40, 300, 2);
    const AdjacencySnapshot snap(triples);
    const std::vector<PropertySpec> fwd{direct(1)}, bwd{inverse(1)};
    std::set<std::pair<EntityId, EntityId>> from_direct, from_inverse;
    for (std::uint64_t e = 1; e <= 40; ++e) {
        for (const auto& n : snap.neighbors(EntityId{e}, fwd)) from_direct.insert({n.entity, EntityId{e}});
        for (const auto& n : snap.neighbors(EntityId{e}, bwd)) from_inverse.insert({EntityId{e}, n.entity});
    }
    CHECK(from_direct == from_inverse);
}

TEST_CASE("merge is a union with newest labels and is idempotent") {
    const AdjacencySnapshot empty;
    GraphFragment f;
    f.triples = {tr(1, 31, 2)};
    f.labels[EntityId{1}] = Label{"one", "en", ""};
    const auto once = merge(empty, f);
    CHECK(once.size() == 1);
    CHECK(merge(once, GraphFragment{}) == once);
    CHECK(merge(once, f) == once);

    GraphFragment g;
    g.labels[EntityId{1}] = Label{"uno", "es", ""};
    g.triples = {tr(1, 31, 2), tr(2, 31, 3)};
    const auto twice = merge(once, g);
    CHECK(twice.size() == 2);
    CHECK(twice.label(EntityId{1})->text == "uno");
}

TEST_CASE("snapshot file reader") {
    std::istringstream in(
        "<http://www.wikidata.org/entity/Q1> <http://www.wikidata.org/prop/direct/P31> "
        "<http://www.wikidata.org/entity/Q2> .\n"
        "# comment\n"
        "\n"
        "<http://www.wikidata.org/entity/Q1> <http://www.w3.org/2000/01/rdf-schema#label> "
        "\"Un \\\"premier\\\"\"@fr .\n"
        "<http://www.wikidata.org/entity/Q1> <http://www.w3.org/2000/01/rdf-schema#label> \"First\"@en .\n"
        "<http://www.wikidata.org/entity/Q1> <http://www.w3.org/2000/01/rdf-schema#label> \"Erste\"@de .\n"
        "<http://www.wikidata.org/entity/Q2> <http://www.wikidata.org/prop/direct/P31> \"literal\" .\n"
        "<http://www.wikidata.org/entity/Q2> <http://www.wikidata.org/prop/direct/P279> "
        "<http://www.wikidata.org/entity/Q3> .\n"
        "garbage line\n");
    const auto r = read_snapshot(in);
    CHECK(r.snapshot.size() == 2);
    CHECK(r.skipped_lines == 2);
    CHECK(r.warnings.size() == 2);
    REQUIRE(r.snapshot.label(EntityId{1}) != nullptr);
    CHECK(r.snapshot.label(EntityId{1})->text == "First");

    std::ostringstream out;
    write_snapshot(out, r.snapshot);
    std::istringstream again(out.str());
    const auto r2 = read_snapshot(again);
    CHECK(r2.skipped_lines == 0);
    CHECK(r2.snapshot == r.snapshot);
}

TEST_CASE("canonical orientation of traversed edges") {
    CHECK(canonical_triple(EntityId{2}, inverse(279), EntityId{1}) == tr(1, 279, 2));
    CHECK(canonical_triple(EntityId{1}, direct(31), EntityId{2}) == tr(1, 31, 2));
}

TEST_CASE("N-Triples literal escaping round-trips through the line parser") {
    const std::string nasty = "quote \" backslash \\ newline \n tab \t bell \x07 caf\xC3\xA9";
    const std::string line = rdf::label_line(EntityId{5}, Label{nasty, "en", ""});
    const auto st = rdf::parse_line(line);
    REQUIRE(st.has_value());
    CHECK(st->object.value == nasty);
    CHECK(st->object.language == "en");
}
