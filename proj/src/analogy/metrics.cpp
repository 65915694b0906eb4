#include <memory>

#include "kgprune/analogy.hpp"
#include "kgprune/error.hpp"

namespace kgp {

Metrics compute_metrics(std::span<const double> probabilities, std::span<const bool> labels,
                        double threshold) {
    if (probabilities.size() != labels.size())
        fail(ErrorKind::DimensionMismatch, "predictions and labels differ in length");
    Metrics m;
    ConfusionMatrix& c = m.confusion;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] > threshold;
        if (predicted && labels[i]) ++c.true_positive;
        else if (predicted) ++c.false_positive;
        else if (labels[i]) ++c.false_negative;
        else ++c.true_negative;
    }
    const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(c.true_positive, c.true_positive + c.false_positive);
    m.recall = ratio(c.true_positive, c.true_positive + c.false_negative);
    m.accuracy = ratio(c.true_positive + c.true_negative, labels.size());
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

Metrics evaluate(const AnalogyModel& model, std::span<const LabeledQuadruple> data, double threshold) {
    std::vector<double> probabilities;
    probabilities.reserve(data.size());
    // std::vector<bool> has no contiguous storage to span over.
    auto labels = std::make_unique<bool[]>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        probabilities.push_back(model.predict(data[i].quadruple));
        labels[i] = data[i].valid;
    }
    return compute_metrics(probabilities, std::span<const bool>(labels.get(), data.size()), threshold);
}

}  // namespace kgp
