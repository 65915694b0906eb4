#pragma once
// TransE training with a margin ranking loss over uniformly corrupted triples.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "kgprune/embeddings.hpp"

namespace kgp {

struct TransEConfig {
    std::size_t dimension = 200;
    double margin = 1.0;
    double learning_rate = 0.01;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::size_t negatives_per_positive = 1;
    NormOrder norm = NormOrder::L2;
    std::uint64_t seed = 0;
    // Record full_margin_objective after every epoch (O(triples * entities * d)).
    bool track_objective = false;
};

// Sparse gradient keyed by row index of the table it was computed against.
struct TransEGradient {
    std::map<std::size_t, std::vector<double>> entity;
    std::map<std::size_t, std::vector<double>> relation;
};

struct TransEReport {
    EmbeddingTable table;
    std::vector<double> epoch_losses;   // summed hinge loss per epoch, before each batch update
    std::size_t skipped_samples = 0;    // positives for which no corruption exists
    std::vector<double> objective;      // per epoch, only with track_objective
};

// Seeded uniform initialisation in [-6/sqrt(d), 6/sqrt(d)], rows normalised.
EmbeddingTable init_transe(std::span<const Triple> triples, const TransEConfig& config);

// sum_i max(0, margin + d(pos_i) - d(neg_i)); pos and neg are paired element-wise.
// Adds d loss / d parameter into `gradient` when provided.
double margin_loss(const EmbeddingTable& table, std::span<const Triple> positives,
                   std::span<const Triple> negatives, double margin, NormOrder norm,
                   TransEGradient* gradient = nullptr);

// Mean hinge loss over every head and tail corruption of every triple: the
// deterministic objective the sampled updates descend on.
double full_margin_objective(const EmbeddingTable& table, std::span<const Triple> triples,
                             double margin, NormOrder norm);

TransEReport train_transe(std::span<const Triple> triples, const TransEConfig& config);


struct TailRankReport {
    std::size_t triples = 0;
    std::size_t hits = 0;        // true tail ranked within the cutoff
    double hit_ratio = 0.0;
    double mean_rank = 0.0;
};

// Filtered tail ranking: every embedded entity is a candidate tail, other known true
// tails of (h, r) are skipped, rank = 1 + number of strictly better candidates.
TailRankReport tail_ranking(const EmbeddingTable& table, std::span<const Triple> triples, NormOrder norm,
                            std::size_t cutoff = 10);

}  // namespace kgp
