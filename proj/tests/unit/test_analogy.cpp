#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kgprune/analogy.hpp"
#include "kgprune/error.hpp"
#include "support/quadruples.hpp"

using namespace kgp;
using testing::gaussian;
using testing::random_quadruple;
using testing::separable_clusters;

namespace {

EmbeddingTable table_for(std::initializer_list<std::uint64_t> ids, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EmbeddingTable t(d);
    for (auto id : ids) t.set_entity(EntityId{id}, gaussian(rng, d));
    return t;
}

DecisionExample ex(std::uint64_t s, std::uint64_t n, Decision d) {
    return DecisionExample{EntityId{s}, EntityId{n}, d, std::nullopt};
}

double accuracy(const Metrics& m) { return m.accuracy.value_or(-1.0); }

}  // namespace

TEST_CASE("zero-initialised model predicts exactly one half") {
    const auto model = AnalogyModel::zeros(ModelShape{8, 16, 8, 1});
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) CHECK(model.predict(random_quadruple(rng, 8)) == 0.5);
}

TEST_CASE("predict rejects mismatched dimension") {
    const auto model = AnalogyModel::zeros(ModelShape{8, 2, 2, 1});
    std::mt19937_64 rng(1);
    try {
        model.predict(random_quadruple(rng, 7));
        FAIL("accepted wrong dimension");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("parameter count") {
    // Minimal configuration: d = 2 leaves a single conv2 output position.
    // conv1 2 weights + 1 bias, conv2 1*1*2*2 weights + 1 bias, dense 1 weight + 1 bias.
    CHECK(param_count(ModelShape{2, 1, 1, 1}) == 10);
    for (std::size_t d : {2u, 5u, 10u, 200u})
        for (std::size_t n1 : {1u, 3u, 16u})
            for (std::size_t n2 : {1u, 8u})
                for (std::size_t s : {1u, 2u}) {
                    const std::size_t width = (d - 2) / s + 1;
                    CHECK(param_count(ModelShape{d, n1, n2, s}) ==
                          (2 * n1 + n1) + (4 * n1 * n2 + n2) + (n2 * width + 1));
                }
    // Doubling conv2 filters doubles the dense input width.
    const ModelShape base{20, 4, 3, 1};
    ModelShape wide = base;
    wide.conv2_filters = 6;
    const std::size_t width = base.conv2_width();
    CHECK(param_count(wide) - param_count(base) == 3 * (4 * 4 + 1) + 3 * width);
    CHECK(AnalogyModel::zeros(ModelShape{200, 16, 8, 1}).param_count() == param_count(ModelShape{200, 16, 8, 1}));
}

TEST_CASE("backpropagation matches central finite differences") {
    for (std::size_t stride : {1u, 2u}) {
        CAPTURE(stride);
        const ModelShape shape{8, 4, 3, stride};
        AnalogyModel model = AnalogyModel::random(shape, 5);
        std::mt19937_64 rng(77);
        const Quadruple q = random_quadruple(rng, 8);
        for (double label : {0.0, 1.0}) {
            std::vector<double> grad(model.param_count(), 0.0);
            model.loss_and_gradient(q, label, grad);
            auto w = model.parameters();
            const double h = 1e-4;
            auto loss_at = [&]() {
                std::vector<double> scratch(model.param_count(), 0.0);
                return model.loss_and_gradient(q, label, scratch);
            };
            for (int probe = 0; probe < 20; ++probe) {
                const std::size_t k = rng() % w.size();
                const double saved = w[k];
                w[k] = saved + h;
                const double up = loss_at();
                w[k] = saved - h;
                const double down = loss_at();
                w[k] = saved;
                const double numeric = (up - down) / (2 * h);
                const double rel =
                    std::fabs(grad[k] - numeric) / std::max({std::fabs(grad[k]), std::fabs(numeric), 1e-6});
                CAPTURE(k);
                CHECK(rel < 1e-3);
            }
        }
    }
}

TEST_CASE("model file round-trips bit-exactly") {
    const auto model = AnalogyModel::random(ModelShape{10, 3, 2, 2}, 8);
    std::stringstream buf;
    save_model(buf, model);
    CHECK(buf.str().starts_with("KGPM v1\n"));
    std::istringstream in(buf.str());
    const auto back = load_model(in);
    CHECK(back == model);

    std::string text = buf.str();
    std::istringstream cut(text.substr(0, text.size() - 20));
    CHECK_THROWS_AS(load_model(cut), Error);
    text.replace(text.find("activation=relu"), 15, "activation=tanh");
    std::istringstream bad(text);
    CHECK_THROWS_AS(load_model(bad), Error);
}

TEST_CASE("training quadruple construction") {
    SUBCASE("one keep and one prune") {
        const auto t = table_for({1, 2, 3}, 4, 1);
        const std::vector<DecisionExample> exs{ex(1, 2, Decision::Keep), ex(1, 3, Decision::Prune)};
        const auto set = build_training_quadruples(exs, t, 0);
        std::size_t invalid = 0;
        for (const auto& q : set.items) {
            if (!q.valid) ++invalid;
            if (q.valid) CHECK(q.first == q.second);   // only same-example pairs are valid
            else CHECK(exs[q.first].decision != exs[q.second].decision);
        }
        CHECK(invalid >= 1);
    }
    SUBCASE("two keeps include the exchange") {
        const auto t = table_for({1, 2, 3, 4}, 4, 2);
        const std::vector<DecisionExample> exs{ex(1, 2, Decision::Keep), ex(3, 4, Decision::Keep)};
        const auto set = build_training_quadruples(exs, t, 0);
        bool forward = false, exchanged = false;
        for (const auto& q : set.items) {
            CHECK(q.valid);
            if (q.first == 0 && q.second == 1 && !q.swapped) {
                forward = true;
                CHECK(q.quadruple == Quadruple(t.entity(EntityId{1}), t.entity(EntityId{2}),
                                               t.entity(EntityId{3}), t.entity(EntityId{4})));
            }
            if (q.first == 1 && q.second == 0 && !q.swapped) {
                exchanged = true;
                CHECK(q.quadruple == Quadruple(t.entity(EntityId{3}), t.entity(EntityId{4}),
                                               t.entity(EntityId{1}), t.entity(EntityId{2})));
            }
        }
        CHECK(forward);
        CHECK(exchanged);
    }
    SUBCASE("three per class is balanced and reproducible") {
        const auto t = table_for({1, 2, 3, 4, 5, 6, 7}, 4, 3);
        const std::vector<DecisionExample> exs{ex(1, 2, Decision::Keep),  ex(1, 3, Decision::Prune),
                                               ex(4, 5, Decision::Keep),  ex(4, 6, Decision::Prune),
                                               ex(7, 2, Decision::Keep),  ex(7, 3, Decision::Prune)};
        // By hand, per class of 3: 3 reflexive pairs x 2 forms + 3 distinct pairs x 4 forms = 18,
        // so 36 valid; 3 x 3 = 9 cross-class invalid; balancing keeps 9 of each.
        const auto a = build_training_quadruples(exs, t, 11);
        const auto b = build_training_quadruples(exs, t, 11);
        std::size_t valid = 0;
        for (const auto& q : a.items) valid += q.valid;
        CHECK(valid == 9);
        CHECK(a.items.size() == 18);
        REQUIRE(a.items.size() == b.items.size());
        for (std::size_t i = 0; i < a.items.size(); ++i) {
            CHECK(a.items[i].quadruple == b.items[i].quadruple);
            CHECK(a.items[i].valid == b.items[i].valid);
        }
    }
    SUBCASE("unembedded examples are dropped and counted") {
        const auto t = table_for({1, 2, 3}, 4, 1);
        const std::vector<DecisionExample> exs{ex(1, 2, Decision::Keep), ex(1, 3, Decision::Prune),
                                               ex(1, 99, Decision::Keep)};
        CHECK(build_training_quadruples(exs, t, 0).dropped_examples == 1);
    }
    SUBCASE("too little data") {
        const auto t = table_for({1, 2}, 4, 1);
        const std::vector<DecisionExample> exs{ex(1, 2, Decision::Keep)};
        try {
            build_training_quadruples(exs, t, 0);
            FAIL("accepted a single example");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InsufficientData);
        }
    }
}

TEST_CASE("training on separable synthetic quadruples") {
    const auto data = separable_clusters(2024, 16, 400);
    const std::span<const LabeledQuadruple> train(data.data(), 320), test(data.data() + 320, 80);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 5e-3;
    cfg.seed = 3;
    const auto report = train_model(train, cfg);
    CHECK(report.final_loss < report.initial_loss);
    CHECK(accuracy(evaluate(report.model, test)) >= 0.90);
    for (const auto& item : train.subspan(0, 20)) {
        if (item.valid) CHECK(report.model.predict(item.quadruple) > 0.5);
        else CHECK(report.model.predict(item.quadruple) < 0.5);
    }

    SUBCASE("zero epochs returns the initialisation") {
        TrainConfig none = cfg;
        none.epochs = 0;
        const auto r0 = train_model(train, none);
        CHECK(r0.model == AnalogyModel::random(r0.model.shape(), cfg.seed));
        CHECK(r0.final_loss == r0.initial_loss);
    }
    SUBCASE("training is reproducible") {
        CHECK(train_model(train, cfg).model == report.model);
    }
    SUBCASE("single-label data is rejected") {
        std::vector<LabeledQuadruple> only_valid;
        for (const auto& x : train) if (x.valid) only_valid.push_back(x);
        CHECK_THROWS_AS(train_model(only_valid, cfg), Error);
    }
}

TEST_CASE("shuffled labels stay at chance") {
    auto data = separable_clusters(2024, 16, 400);
    testing::shuffle_labels(data, 8);
    const std::span<const LabeledQuadruple> train(data.data(), 320), test(data.data() + 320, 80);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 5e-3;
    cfg.seed = 3;
    const double acc = accuracy(evaluate(train_model(train, cfg).model, test));
    CHECK(acc >= 0.4);
    CHECK(acc <= 0.6);
}

TEST_CASE("predictions are per-sample and order independent") {
    const auto model = AnalogyModel::random(ModelShape{6, 3, 2, 1}, 4);
    std::mt19937_64 rng(12);
    std::vector<Quadruple> batch;
    for (int i = 0; i < 16; ++i) batch.push_back(random_quadruple(rng, 6));
    std::vector<double> forward, backward;
    for (const auto& q : batch) forward.push_back(model.predict(q));
    for (auto it = batch.rbegin(); it != batch.rend(); ++it) backward.push_back(model.predict(*it));
    std::reverse(backward.begin(), backward.end());
    CHECK(forward == backward);
    for (double p : forward) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    // Saturated logits still map into [0, 1].
    const Quadruple huge(std::vector<double>(6, 1e6), std::vector<double>(6, -1e6),
                         std::vector<double>(6, 1e6), std::vector<double>(6, 1e6));
    const double p = model.predict(huge);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
}

TEST_CASE("exchange-closed valid set gives identical prediction multisets") {
    const auto t = table_for({1, 2, 3, 4, 5, 6}, 8, 4);
    const std::vector<DecisionExample> exs{ex(1, 2, Decision::Keep), ex(3, 4, Decision::Keep),
                                           ex(5, 6, Decision::Keep)};
    const auto set = build_training_quadruples(exs, t, 0);   // one class only: no downsampling
    const auto model = AnalogyModel::random(ModelShape{8, 4, 2, 1}, 9);
    std::vector<double> original, exchanged;
    for (const auto& q : set.items) {
        original.push_back(model.predict(q.quadruple));
        const Quadruple swapped(q.quadruple.row(2), q.quadruple.row(3), q.quadruple.row(0), q.quadruple.row(1));
        exchanged.push_back(model.predict(swapped));
    }
    std::sort(original.begin(), original.end());
    std::sort(exchanged.begin(), exchanged.end());
    CHECK(original == exchanged);
}

TEST_CASE("metrics") {
    SUBCASE("all correct") {
        const std::vector<double> p{0.9, 0.1, 0.8, 0.2};
        const bool y[] = {true, false, true, false};
        const auto m = compute_metrics(p, y, 0.5);
        CHECK(*m.precision == 1.0);
        CHECK(*m.recall == 1.0);
        CHECK(*m.f1 == 1.0);
        CHECK(*m.accuracy == 1.0);
    }
    SUBCASE("constant one half at the threshold is negative") {
        const std::vector<double> p(4, 0.5);
        const bool y[] = {true, false, true, false};
        const auto m = compute_metrics(p, y, 0.5);
        CHECK(*m.recall == 0.0);
        CHECK_FALSE(m.precision.has_value());
        CHECK_FALSE(m.f1.has_value());
        CHECK(*m.accuracy == 0.5);
    }
    SUBCASE("ten hand-labelled predictions") {
        // predicted positive (> 0.5): indices 0,1,2,3,6 ; labels positive: 0,1,4,6,8,9
        const std::vector<double> p{0.9, 0.8, 0.7, 0.6, 0.4, 0.3, 0.55, 0.2, 0.5, 0.1};
        const bool y[] = {true, true, false, false, true, false, true, false, true, true};
        const auto m = compute_metrics(p, y, 0.5);
        // TP = {0,1,6} = 3, FP = {2,3} = 2, FN = {4,8,9} = 3, TN = {5,7} = 2.
        CHECK(m.confusion == ConfusionMatrix{3, 2, 2, 3});
        CHECK(*m.precision == doctest::Approx(3.0 / 5.0));
        CHECK(*m.recall == doctest::Approx(3.0 / 6.0));
        CHECK(*m.f1 == doctest::Approx(2 * 0.6 * 0.5 / 1.1));
        CHECK(*m.accuracy == doctest::Approx(0.5));
    }
}

TEST_CASE("decision CSV") {
    std::istringstream in(
        "seed_qid,neighbor_qid,extra,label,depth\n"
        "Q1,Q2,x,keep,1\n"
        "http://www.wikidata.org/entity/Q1,Q3,y,0,2\n"
        "\n"
        "Q4,Q4,z,1,\n");
    const auto data = read_decision_csv(in);
    REQUIRE(data.examples.size() == 3);
    CHECK(data.examples[0] == DecisionExample{EntityId{1}, EntityId{2}, Decision::Keep, 1u});
    CHECK(data.examples[1].decision == Decision::Prune);
    CHECK(data.examples[1].neighbor == EntityId{3});
    CHECK_FALSE(data.examples[2].depth.has_value());
    CHECK(data.self_decisions == 1);

    std::istringstream bad("seed,neighbor,decision\nQ1,Q2,maybe\n");
    CHECK_THROWS_AS(read_decision_csv(bad), Error);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_decision_csv(empty), Error);
}
