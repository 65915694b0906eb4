#pragma once
// Convolutional classifier over analogical quadruples A:B::C:D.
//
// Input layout: the four d-vectors form a 4 x d grid with rows (a, b, c, d).
//   conv1: n1 filters, each a 2-tap kernel pairing rows (a,b) and, with the same
//          weights, rows (c,d) at every embedding coordinate -> n1 x 2 x d, ReLU.
//   conv2: n2 filters with 2 x 2 kernels spanning both pair maps and two adjacent
//          embedding coordinates, stride `conv2_stride`, no padding -> n2 x L, ReLU,
//          L = (d - 2) / stride + 1.
//   dense: n2 * L -> 1 logit, sigmoid.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgprune/embeddings.hpp"

namespace kgp {

enum class Decision : std::uint8_t { Keep, Prune };

std::string_view to_string(Decision d) noexcept;

struct DecisionExample {
    EntityId seed;
    EntityId neighbor;
    Decision decision = Decision::Keep;
    std::optional<unsigned> depth;

    friend bool operator==(const DecisionExample&, const DecisionExample&) = default;
};

struct DecisionDataset {
    std::vector<DecisionExample> examples;
    std::size_t self_decisions = 0;   // rows with seed == neighbor (kept, flagged)
};

// CSV with a header row; columns located by name (seed, neighbor, decision/label, depth),
// falling back to the first four positions. Unknown columns are ignored.
DecisionDataset read_decision_csv(std::istream& in);
DecisionDataset load_decision_csv(const std::filesystem::path& path);

class Quadruple {
public:
    Quadruple() = default;
    Quadruple(std::span<const double> a, std::span<const double> b, std::span<const double> c,
              std::span<const double> d);

    std::size_t dimension() const noexcept { return dimension_; }
    // Row 0..3 = a, b, c, d.
    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * dimension_, dimension_};
    }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const Quadruple&, const Quadruple&) = default;

private:
    std::size_t dimension_ = 0;
    std::vector<double> values_;
};

struct LabeledQuadruple {
    Quadruple quadruple;
    bool valid = false;
    // Provenance: examples[first] : examples[second], with both pairs reversed when `swapped`.
    std::size_t first = 0;
    std::size_t second = 0;
    bool swapped = false;
};

struct QuadrupleSet {
    std::vector<LabeledQuadruple> items;
    std::size_t dropped_examples = 0;   // examples with an unembedded endpoint
};

// Same-decision pairs are valid (augmented with exchange and inner symmetry),
// opposite-decision pairs are invalid (one orientation, no augmentation). When both
// classes are present the larger is downsampled to the smaller with `seed`.
QuadrupleSet build_training_quadruples(std::span<const DecisionExample> examples,
                                       const EmbeddingTable& table, std::uint64_t seed);

struct ModelShape {
    std::size_t dimension = 200;
    std::size_t conv1_filters = 16;
    std::size_t conv2_filters = 8;
    std::size_t conv2_stride = 1;

    std::size_t conv2_width() const { return (dimension - 2) / conv2_stride + 1; }
    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Trainable scalars: conv kernels and biases plus dense weights and bias.
std::size_t param_count(const ModelShape& shape);

class AnalogyModel {
public:
    static AnalogyModel zeros(const ModelShape& shape);
    static AnalogyModel random(const ModelShape& shape, std::uint64_t seed);

    const ModelShape& shape() const noexcept { return shape_; }
    std::size_t param_count() const noexcept { return params_.size(); }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    // Throws DimensionMismatch.
    double logit(const Quadruple& q) const;
    double predict(const Quadruple& q) const;

    // Binary cross-entropy of one sample (label 1 = valid analogy); adds dLoss/dparams into grad.
    double loss_and_gradient(const Quadruple& q, double label, std::span<double> grad) const;

    friend bool operator==(const AnalogyModel&, const AnalogyModel&) = default;

private:
    explicit AnalogyModel(const ModelShape& shape);
    void check_input(const Quadruple& q) const;

    ModelShape shape_;
    std::vector<double> params_;
};

// KGPM v1 text container; floats in shortest round-trip form.
void save_model(std::ostream& out, const AnalogyModel& model);
void save_model(const std::filesystem::path& path, const AnalogyModel& model);
AnalogyModel load_model(std::istream& in);
AnalogyModel load_model(const std::filesystem::path& path);

enum class Optimizer : std::uint8_t { Sgd, Adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::size_t conv1_filters = 16;
    std::size_t conv2_filters = 8;
    std::size_t conv2_stride = 1;
    double threshold = 0.5;
    Optimizer optimizer = Optimizer::Adam;
};

struct TrainReport {
    AnalogyModel model;
    double initial_loss = 0.0;          // mean BCE of the initial model over the training set
    double final_loss = 0.0;            // mean BCE after the last epoch
    std::vector<double> epoch_losses;
};

// Throws InsufficientData (empty or single-label data) and NonFiniteLoss.
TrainReport train_model(std::span<const LabeledQuadruple> data, const TrainConfig& config);

double mean_loss(const AnalogyModel& model, std::span<const LabeledQuadruple> data);

struct ConfusionMatrix {
    std::size_t true_positive = 0;
    std::size_t false_positive = 0;
    std::size_t true_negative = 0;
    std::size_t false_negative = 0;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Undefined metrics (zero denominator) are empty rather than 0.
struct Metrics {
    ConfusionMatrix confusion;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> accuracy;
};

// Positive class = valid analogy; a probability counts as positive only when > threshold.
Metrics compute_metrics(std::span<const double> probabilities, std::span<const bool> labels,
                        double threshold);
Metrics evaluate(const AnalogyModel& model, std::span<const LabeledQuadruple> data,
                 double threshold = 0.5);

using QuadrupleScorer = std::function<double(const Quadruple&)>;

}  // namespace kgp
