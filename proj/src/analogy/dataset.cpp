#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <random>

#include "kgprune/analogy.hpp"
#include "kgprune/error.hpp"
#include "kgprune/rdf.hpp"

namespace kgp {

std::string_view to_string(Decision d) noexcept {
    return d == Decision::Keep ? "keep" : "prune";
}

Quadruple::Quadruple(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                     std::span<const double> d)
    : dimension_(a.size()) {
    if (b.size() != dimension_ || c.size() != dimension_ || d.size() != dimension_)
        fail(ErrorKind::DimensionMismatch, "quadruple rows differ in length");
    values_.reserve(4 * dimension_);
    for (auto row : {a, b, c, d}) values_.insert(values_.end(), row.begin(), row.end());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

EntityId entity_cell(const std::string& cell) {
    const std::string t = trimmed(cell);
    if (auto id = rdf::entity_from_iri(t)) return *id;
    return parse_entity_id(t);
}

Decision decision_cell(const std::string& cell) {
    const std::string t = lower(trimmed(cell));
    if (t == "keep" || t == "kept" || t == "1" || t == "true" || t == "yes" || t == "k") return Decision::Keep;
    if (t == "prune" || t == "pruned" || t == "0" || t == "false" || t == "no" || t == "p")
        return Decision::Prune;
    fail(ErrorKind::FormatError, "unrecognised decision '" + cell + "'");
}

}  // namespace

DecisionDataset read_decision_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::FormatError, "decision CSV: missing header row");
    const auto header = split_csv(line);
    std::ptrdiff_t seed_col = -1, neighbor_col = -1, decision_col = -1, depth_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string h = lower(trimmed(header[i]));
        if (seed_col < 0 && h.find("seed") != std::string::npos) seed_col = static_cast<std::ptrdiff_t>(i);
        else if (neighbor_col < 0 && (h.find("neighbo") != std::string::npos || h.find("candidate") != std::string::npos))
            neighbor_col = static_cast<std::ptrdiff_t>(i);
        else if (decision_col < 0 && (h.find("decision") != std::string::npos || h.find("label") != std::string::npos ||
                                      h == "keep" || h == "class"))
            decision_col = static_cast<std::ptrdiff_t>(i);
        else if (depth_col < 0 && h.find("depth") != std::string::npos)
            depth_col = static_cast<std::ptrdiff_t>(i);
    }
    if (seed_col < 0 || neighbor_col < 0 || decision_col < 0) {
        if (header.size() < 3) fail(ErrorKind::FormatError, "decision CSV: need seed, neighbor, decision columns");
        seed_col = 0;
        neighbor_col = 1;
        decision_col = 2;
        depth_col = header.size() > 3 ? 3 : -1;
    }

    DecisionDataset data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty() || trimmed(line) == "\r") continue;
        const auto cells = split_csv(line);
        const auto need = static_cast<std::size_t>(std::max({seed_col, neighbor_col, decision_col}));
        try {
            if (cells.size() <= need) fail(ErrorKind::FormatError, "too few columns");
            DecisionExample ex;
            ex.seed = entity_cell(cells[seed_col]);
            ex.neighbor = entity_cell(cells[neighbor_col]);
            ex.decision = decision_cell(cells[decision_col]);
            if (depth_col >= 0 && static_cast<std::size_t>(depth_col) < cells.size() &&
                !trimmed(cells[depth_col]).empty())
                ex.depth = static_cast<unsigned>(std::stoul(trimmed(cells[depth_col])));
            if (ex.seed == ex.neighbor) ++data.self_decisions;
            data.examples.push_back(ex);
        } catch (const std::exception& e) {
            fail(ErrorKind::FormatError, "decision CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return data;
}

DecisionDataset load_decision_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    return read_decision_csv(in);
}

QuadrupleSet build_training_quadruples(std::span<const DecisionExample> examples,
                                       const EmbeddingTable& table, std::uint64_t seed) {
    QuadrupleSet out;
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (table.has_entity(examples[i].seed) && table.has_entity(examples[i].neighbor))
            usable.push_back(i);
        else
            ++out.dropped_examples;
    }
    if (usable.size() < 2)
        fail(ErrorKind::InsufficientData, "need at least two embedded decision examples, have " +
                                              std::to_string(usable.size()));

    auto make = [&](std::size_t i, std::size_t j, bool swapped, bool valid) {
        const auto& x = examples[i];
        const auto& y = examples[j];
        const auto a = table.entity(swapped ? x.neighbor : x.seed);
        const auto b = table.entity(swapped ? x.seed : x.neighbor);
        const auto c = table.entity(swapped ? y.neighbor : y.seed);
        const auto d = table.entity(swapped ? y.seed : y.neighbor);
        return LabeledQuadruple{Quadruple(a, b, c, d), valid, i, j, swapped};
    };

    std::vector<LabeledQuadruple> valid, invalid;
    for (std::size_t u = 0; u < usable.size(); ++u) {
        for (std::size_t v = u; v < usable.size(); ++v) {
            const std::size_t i = usable[u], j = usable[v];
            if (examples[i].decision == examples[j].decision) {
                // a:b::c:d, its exchange c:d::a:b, and the inner-symmetric forms b:a::d:c, d:c::b:a.
                valid.push_back(make(i, j, false, true));
                valid.push_back(make(i, j, true, true));
                if (i != j) {
                    valid.push_back(make(j, i, false, true));
                    valid.push_back(make(j, i, true, true));
                }
            } else {
                invalid.push_back(make(i, j, false, false));
            }
        }
    }

    out.items.reserve(valid.size() + invalid.size());
    if (!valid.empty() && !invalid.empty()) {
        std::vector<LabeledQuadruple>& larger = valid.size() > invalid.size() ? valid : invalid;
        const std::size_t target = std::min(valid.size(), invalid.size());
        std::vector<std::size_t> idx(larger.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(target);
        std::sort(idx.begin(), idx.end());
        std::vector<LabeledQuadruple> kept;
        kept.reserve(target);
        for (std::size_t i : idx) kept.push_back(std::move(larger[i]));
        larger = std::move(kept);
    }
    for (auto& q : valid) out.items.push_back(std::move(q));
    for (auto& q : invalid) out.items.push_back(std::move(q));
    return out;
}

}  // namespace kgp
