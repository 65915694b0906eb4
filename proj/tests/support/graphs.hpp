#pragma once
// Seeded random graph generation and brute-force oracles for tests.
// Oracles here scan the raw triple list and never touch the snapshot indexes.

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "kgprune/kg_store.hpp"

namespace kgp::testing {

inline std::vector<Triple> random_triples(std::mt19937_64& rng, std::size_t nodes, std::size_t edges,
                                          std::size_t properties) {
    std::uniform_int_distribution<std::uint64_t> node(1, nodes);
    std::uniform_int_distribution<std::uint64_t> prop(1, properties);
    std::vector<Triple> out;
    for (std::size_t i = 0; i < edges; ++i)
        out.push_back(Triple{EntityId{node(rng)}, prop(rng), EntityId{node(rng)}});
    return out;
}

// Neighbours of `e` by direct scan of the triple list.
inline std::set<std::pair<PropertySpec, EntityId>> scan_neighbors(const std::vector<Triple>& triples,
                                                                  EntityId e,
                                                                  const std::vector<PropertySpec>& specs) {
    std::set<std::pair<PropertySpec, EntityId>> out;
    for (const Triple& t : triples) {
        for (const PropertySpec& s : specs) {
            if (t.property != s.property) continue;
            if (s.direction == Direction::Direct && t.subject == e) out.insert({s, t.object});
            if (s.direction == Direction::Inverse && t.object == e) out.insert({s, t.subject});
        }
    }
    return out;
}

// Shortest hop counts from seeds, expanding only through nodes accepted by `expand`.
template <typename Expand>
std::map<EntityId, unsigned> restricted_bfs(const std::vector<Triple>& triples,
                                            const std::vector<EntityId>& seeds,
                                            const std::vector<PropertySpec>& specs, Expand expand,
                                            unsigned max_depth = ~0u) {
    std::map<EntityId, unsigned> depth;
    std::deque<EntityId> queue;
    for (EntityId s : seeds)
        if (depth.emplace(s, 0).second) queue.push_back(s);
    while (!queue.empty()) {
        const EntityId cur = queue.front();
        queue.pop_front();
        if (depth[cur] >= max_depth) continue;
        for (const auto& [spec, nb] : scan_neighbors(triples, cur, specs)) {
            if (depth.contains(nb) || !expand(nb)) continue;
            depth[nb] = depth[cur] + 1;
            queue.push_back(nb);
        }
    }
    return depth;
}

}  // namespace kgp::testing
