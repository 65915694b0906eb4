#include "kgprune/transe.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "kgprune/error.hpp"
#include "kgprune/simd.hpp"

namespace kgp {
namespace {

void normalize(std::span<double> row) {
    const double n = std::sqrt(simd::sum_squares(row));
    if (n > 0.0) simd::scale(1.0 / n, row);
}

struct Residual {
    std::vector<double> values;
    double distance = 0.0;
};

Residual residual(const EmbeddingTable& table, const Triple& t, NormOrder norm) {
    Residual r;
    r.values.resize(table.dimension());
    simd::translation_residual(table.entity(t.subject), table.relation(t.property),
                               table.entity(t.object), r.values);
    if (norm == NormOrder::L2) {
        r.distance = std::sqrt(simd::sum_squares(r.values));
    } else {
        double acc = 0.0;
        for (double v : r.values) acc += std::fabs(v);
        r.distance = acc;
    }
    return r;
}

// d distance / d residual
std::vector<double> distance_gradient(const Residual& r, NormOrder norm) {
    std::vector<double> g(r.values.size(), 0.0);
    if (norm == NormOrder::L2) {
        if (r.distance > 0.0)
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = r.values[i] / r.distance;
    } else {
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = r.values[i] > 0.0 ? 1.0 : (r.values[i] < 0.0 ? -1.0 : 0.0);
    }
    return g;
}

std::vector<double>& grad_row(std::map<std::size_t, std::vector<double>>& rows, std::size_t index,
                              std::size_t dimension) {
    auto& row = rows[index];
    if (row.empty()) row.assign(dimension, 0.0);
    return row;
}

// Accumulate sign * d distance(t) / d params.
void add_triple_gradient(const EmbeddingTable& table, const Triple& t, std::span<const double> g,
                         double sign, TransEGradient& out) {
    const std::size_t d = table.dimension();
    simd::axpy(sign, g, grad_row(out.entity, *table.entity_index(t.subject), d));
    simd::axpy(sign, g, grad_row(out.relation, *table.relation_index(t.property), d));
    simd::axpy(-sign, g, grad_row(out.entity, *table.entity_index(t.object), d));
}

}  // namespace

EmbeddingTable init_transe(std::span<const Triple> triples, const TransEConfig& config) {
    if (config.dimension == 0) fail(ErrorKind::DegenerateInput, "TransE dimension must be positive");
    std::set<EntityId> entities;
    std::set<std::uint64_t> relations;
    for (const Triple& t : triples) {
        entities.insert(t.subject);
        entities.insert(t.object);
        relations.insert(t.property);
    }
    std::mt19937_64 rng(config.seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(config.dimension));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    EmbeddingTable table(config.dimension);
    std::vector<double> row(config.dimension);
    for (std::uint64_t p : relations) {
        for (double& v : row) v = uniform(rng);
        normalize(row);
        table.set_relation(p, row);
    }
    for (EntityId e : entities) {
        for (double& v : row) v = uniform(rng);
        normalize(row);
        table.set_entity(e, row);
    }
    return table;
}

double margin_loss(const EmbeddingTable& table, std::span<const Triple> positives,
                   std::span<const Triple> negatives, double margin, NormOrder norm,
                   TransEGradient* gradient) {
    if (positives.size() != negatives.size())
        fail(ErrorKind::DimensionMismatch, "positive/negative batches differ in length");
    double loss = 0.0;
    for (std::size_t i = 0; i < positives.size(); ++i) {
        const Residual pos = residual(table, positives[i], norm);
        const Residual neg = residual(table, negatives[i], norm);
        const double hinge = margin + pos.distance - neg.distance;
        if (hinge <= 0.0) continue;
        loss += hinge;
        if (gradient == nullptr) continue;
        add_triple_gradient(table, positives[i], distance_gradient(pos, norm), 1.0, *gradient);
        add_triple_gradient(table, negatives[i], distance_gradient(neg, norm), -1.0, *gradient);
    }
    return loss;
}

double full_margin_objective(const EmbeddingTable& table, std::span<const Triple> triples,
                             double margin, NormOrder norm) {
    double total = 0.0;
    std::size_t count = 0;
    for (const Triple& t : triples) {
        const double positive = score(table, t.subject, t.property, t.object, norm);
        for (EntityId e : table.entity_ids()) {
            if (e != t.object) {
                total += std::max(0.0, margin + positive - score(table, t.subject, t.property, e, norm));
                ++count;
            }
            if (e != t.subject) {
                total += std::max(0.0, margin + positive - score(table, e, t.property, t.object, norm));
                ++count;
            }
        }
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

TransEReport train_transe(std::span<const Triple> triples, const TransEConfig& config) {
    if (triples.empty()) fail(ErrorKind::DegenerateInput, "TransE training needs at least one triple");
    if (config.batch_size == 0 || config.negatives_per_positive == 0 || config.margin <= 0.0 ||
        config.learning_rate <= 0.0)
        fail(ErrorKind::DegenerateInput, "TransE hyperparameters must be strictly positive");

    TransEReport report{init_transe(triples, config), {}, 0, {}};
    EmbeddingTable& table = report.table;
    const std::size_t entity_count = table.entity_count();

    std::vector<Triple> order(triples.begin(), triples.end());
    // Separate stream from the initialiser so changing epochs never perturbs init.
    std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    std::uniform_int_distribution<std::size_t> pick(0, entity_count - 1);
    std::bernoulli_distribution corrupt_head(0.5);

    std::vector<Triple> positives, negatives;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            positives.clear();
            negatives.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const Triple& t = order[i];
                for (std::size_t n = 0; n < config.negatives_per_positive; ++n) {
                    const bool head = corrupt_head(rng);
                    const EntityId keep = head ? t.subject : t.object;
                    if (entity_count < 2) {
                        ++report.skipped_samples;
                        continue;
                    }
                    EntityId replacement = keep;
                    while (replacement == keep) replacement = table.entity_ids()[pick(rng)];
                    Triple neg = t;
                    (head ? neg.subject : neg.object) = replacement;
                    positives.push_back(t);
                    negatives.push_back(neg);
                }
            }
            TransEGradient grad;
            const double loss =
                margin_loss(table, positives, negatives, config.margin, config.norm, &grad);
            if (!std::isfinite(loss)) fail(ErrorKind::NonFiniteLoss, "TransE loss diverged");
            epoch_loss += loss;
            for (auto& [idx, g] : grad.entity) simd::axpy(-config.learning_rate, g, table.entity_row(idx));
            for (auto& [idx, g] : grad.relation)
                simd::axpy(-config.learning_rate, g, table.relation_row(idx));
        }
        for (std::size_t i = 0; i < entity_count; ++i) normalize(table.entity_row(i));
        report.epoch_losses.push_back(epoch_loss);
        if (config.track_objective)
            report.objective.push_back(full_margin_objective(table, triples, config.margin, config.norm));
    }
    return report;
}


TailRankReport tail_ranking(const EmbeddingTable& table, std::span<const Triple> triples, NormOrder norm,
                            std::size_t cutoff) {
    const std::set<Triple> known(triples.begin(), triples.end());
    const auto candidates = table.entity_ids();
    std::vector<double> target(table.dimension());
    const auto distance = [&](EntityId e) {
        return norm == NormOrder::L2 ? simd::squared_distance(target, table.entity(e))
                                     : simd::l1_distance(target, table.entity(e));
    };

    TailRankReport report;
    double rank_sum = 0.0;
    for (const Triple& t : triples) {
        const auto h = table.entity(t.subject);
        const auto r = table.relation(t.property);
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = h[i] + r[i];
        const double truth = distance(t.object);
        std::size_t rank = 1;
        for (EntityId cand : candidates) {
            if (cand == t.object || known.contains(Triple{t.subject, t.property, cand})) continue;
            if (distance(cand) < truth) ++rank;
        }
        ++report.triples;
        if (rank <= cutoff) ++report.hits;
        rank_sum += static_cast<double>(rank);
    }
    if (report.triples > 0) {
        report.hit_ratio = static_cast<double>(report.hits) / static_cast<double>(report.triples);
        report.mean_rank = rank_sum / static_cast<double>(report.triples);
    }
    return report;
}

}  // namespace kgp
