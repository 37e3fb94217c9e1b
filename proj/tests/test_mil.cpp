#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "uamil/mil.hpp"
#include "uamil/rng.hpp"

using namespace uamil;

namespace {

std::vector<Bag> tiny_bags(std::size_t n_neg_bags, std::size_t n_pos_bags,
                           std::size_t instances_each) {
    std::vector<Bag> bags;
    for (std::size_t b = 0; b < n_neg_bags + n_pos_bags; ++b) {
        Bag bag;
        bag.label = b >= n_neg_bags ? 1 : 0;
        bag.series_ref = (bag.label ? "p" : "n") + std::to_string(b);
        for (std::size_t i = 0; i < instances_each; ++i) {
            Instance inst;
            inst.bag_id = bag.series_ref;
            inst.index = i;
            inst.window = Matrix(1, 2);
            inst.pseudo_label = bag.label;
            bag.instances.push_back(inst);
        }
        bags.push_back(bag);
    }
    return bags;
}

InstancePrediction pred_of(double mean, double confidence) {
    InstancePrediction p;
    p.mean = mean;
    p.confidence = confidence;
    return p;
}

} // namespace

TEST_CASE("sample_batch draws the requested composition") {
    const auto bags = tiny_bags(3, 2, 4);
    DetRng rng(1);
    const auto batch = sample_batch(bags, rng);
    REQUIRE(batch.size() == 600);
    std::size_t n_neg = 0, n_pos = 0;
    for (const auto& ref : batch) (ref.pseudo_label == 1 ? n_pos : n_neg)++;
    CHECK(n_neg == 200);
    CHECK(n_pos == 400);
}

TEST_CASE("sample_batch allows an all-positive batch") {
    const auto bags = tiny_bags(1, 1, 3);
    DetRng rng(2);
    const auto batch = sample_batch(bags, rng, 0, 10);
    REQUIRE(batch.size() == 10);
    for (const auto& ref : batch) REQUIRE(ref.pseudo_label == 1);
}

TEST_CASE("sample_batch is deterministic given the RNG state") {
    const auto bags = tiny_bags(2, 2, 5);
    for (int trial = 0; trial < 100; ++trial) {
        DetRng a(trial), b(trial);
        const auto batch_a = sample_batch(bags, a, 7, 9);
        const auto batch_b = sample_batch(bags, b, 7, 9);
        REQUIRE(batch_a.size() == batch_b.size());
        for (std::size_t i = 0; i < batch_a.size(); ++i) {
            REQUIRE(batch_a[i].bag == batch_b[i].bag);
            REQUIRE(batch_a[i].instance == batch_b[i].instance);
        }
    }
}

TEST_CASE("sample_batch fails when a class is absent") {
    const auto only_neg = tiny_bags(2, 0, 3);
    DetRng rng(3);
    CHECK_THROWS_AS(sample_batch(only_neg, rng, 1, 1), DataError);
}

TEST_CASE("attention worked examples") {
    SECTION("pseudo-negatives always get attention 1") {
        const auto batch = assign_attention({0.99, 0.01}, {1.0, 1.0}, {0, 1});
        CHECK(batch.attention[0] == 1.0);
    }
    SECTION("median splits the pseudo-positives") {
        // scores {0.9, 0.2} -> beta = 0.55; 0.9 passes, 0.2 is zeroed.
        const auto batch = assign_attention({0.9, 0.2}, {1.0, 1.0}, {1, 1});
        CHECK(batch.beta == Catch::Approx(0.55));
        CHECK(batch.attention[0] == 0.9);
        CHECK(batch.attention[1] == 0.0);
    }
    SECTION("ties at the median are kept by the inclusive comparison") {
        const auto batch = assign_attention({0.4, 0.4, 0.4}, {1.0, 1.0, 1.0}, {1, 1, 1});
        CHECK(batch.beta == Catch::Approx(0.4));
        for (double a : batch.attention) CHECK(a == Catch::Approx(0.4));
    }
    SECTION("no pseudo-positives leaves beta undefined") {
        CHECK_THROWS_AS(assign_attention({0.5}, {1.0}, {0}), DataError);
    }
    SECTION("whole-batch median scope includes negatives in beta") {
        // scores: neg 0.1, pos {0.5, 0.9} -> median over all three is 0.5,
        // over positives alone it would be 0.7.
        const auto batch = assign_attention({0.1, 0.5, 0.9}, {1.0, 1.0, 1.0}, {0, 1, 1},
                                            MedianScope::all);
        CHECK(batch.beta == Catch::Approx(0.5));
        CHECK(batch.attention[0] == 1.0);
        CHECK(batch.attention[1] == 0.5); // at the threshold, kept
        CHECK(batch.attention[2] == 0.9);
    }
}

TEST_CASE("attention values stay in the allowed set") {
    DetRng rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        std::vector<double> preds(n), confs(n);
        std::vector<int> labels(n);
        bool any_pos = false;
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = rng.uniform();
            confs[i] = rng.uniform();
            labels[i] = static_cast<int>(rng.below(2));
            any_pos |= labels[i] == 1;
        }
        if (!any_pos) labels[0] = 1;
        const auto batch = assign_attention(preds, confs, labels);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = batch.attention[i];
            if (labels[i] == 0) {
                REQUIRE(a == 1.0);
            } else {
                // Either exactly zero or the score itself, at or above beta.
                if (a != 0.0) {
                    REQUIRE(a == confs[i] * preds[i]);
                    REQUIRE(a >= batch.beta);
                } else {
                    REQUIRE(confs[i] * preds[i] < batch.beta);
                }
            }
        }
    }
}

TEST_CASE("at least half of distinct-scored pseudo-positives get zero attention") {
    DetRng rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(30);
        std::vector<double> preds, confs;
        std::vector<int> labels;
        std::set<double> used;
        for (std::size_t i = 0; i < n; ++i) {
            double s = rng.uniform();
            while (used.contains(s)) s = rng.uniform();
            used.insert(s);
            preds.push_back(s);
            confs.push_back(1.0);
            labels.push_back(1);
        }
        const auto batch = assign_attention(preds, confs, labels);
        std::size_t zeroed = 0;
        for (double a : batch.attention) zeroed += static_cast<std::size_t>(a == 0.0);
        REQUIRE(zeroed >= n / 2);
    }
}

TEST_CASE("weighted_loss worked examples") {
    AttentionBatch batch;
    batch.attention = {1.0, 1.0, 1.0};
    CHECK(weighted_loss(batch, std::vector<double>{3.0, 6.0, 9.0}) == Catch::Approx(6.0));
    batch.attention = {0.0, 0.0, 0.0};
    CHECK(weighted_loss(batch, std::vector<double>{3.0, 6.0, 9.0}) == 0.0);
    batch.attention = {1.0, 0.0};
    CHECK(weighted_loss(batch, std::vector<double>{2.0, 100.0}) == 1.0);
}

TEST_CASE("aggregate_bag worked examples") {
    SECTION("top-1 picks the max") {
        const std::vector<InstancePrediction> preds = {pred_of(0.9, 0.8), pred_of(0.1, 0.7),
                                                       pred_of(0.5, 0.6)};
        const BagPrediction bag = aggregate_bag(preds, 1);
        CHECK(bag.prediction == 0.9);
        CHECK(bag.confidence == 0.8);
        REQUIRE(bag.top_indices == std::vector<std::size_t>{0});
    }
    SECTION("K >= N reduces to plain means") {
        const std::vector<InstancePrediction> preds = {pred_of(0.2, 0.5), pred_of(0.4, 0.9)};
        const BagPrediction bag = aggregate_bag(preds, 10);
        CHECK(bag.prediction == Catch::Approx(0.3));
        CHECK(bag.confidence == Catch::Approx(0.7));
    }
    SECTION("ties break toward the lower index") {
        const std::vector<InstancePrediction> preds = {pred_of(0.8, 0.1), pred_of(0.8, 0.2),
                                                       pred_of(0.2, 0.3)};
        const BagPrediction bag = aggregate_bag(preds, 2);
        REQUIRE(bag.top_indices == std::vector<std::size_t>{0, 1});
        CHECK(bag.prediction == Catch::Approx(0.8));
    }
    SECTION("errors") {
        CHECK_THROWS_AS(aggregate_bag({}, 1), DataError);
        CHECK_THROWS_AS(aggregate_bag({pred_of(0.5, 0.5)}, 0), ConfigError);
    }
}

TEST_CASE("default top-K rule is ceil(N/10) with a floor of 1") {
    CHECK(default_top_k(1) == 1);
    CHECK(default_top_k(9) == 1);
    CHECK(default_top_k(10) == 1);
    CHECK(default_top_k(11) == 2);
    CHECK(default_top_k(100) == 10);
}

TEST_CASE("weighted elbo likelihood equals the attention-weighted loss") {
    // The trainer's objective composes the variational loss with the
    // attention-weighted likelihood; both views must agree numerically.
    DetRng rng(88);
    const std::size_t in_dim = 5;
    VariationalHead head(in_dim, 3);
    for (std::size_t i = 0; i < head.weight_count(); ++i) {
        head.mu[i] = rng.normal();
        head.rho[i] = -1.0 - rng.uniform();
    }
    std::vector<std::vector<double>> features(6, std::vector<double>(in_dim));
    std::vector<int> labels(6);
    std::vector<double> predictions(6), confidences(6);
    for (std::size_t i = 0; i < 6; ++i) {
        for (double& v : features[i]) v = rng.normal();
        labels[i] = i < 2 ? 0 : 1;
        predictions[i] = rng.uniform();
        confidences[i] = rng.uniform();
    }
    const AttentionBatch att = assign_attention(predictions, confidences, labels);

    std::vector<std::vector<double>> eps(3, std::vector<double>(head.weight_count()));
    for (auto& row : eps)
        for (double& e : row) e = rng.normal();

    const ElboResult res =
        elbo_core(features, labels, head, eps, &att.attention, 1.0 / 6.0, 0.25);

    // Reassemble by hand: per sample, Bernoulli NLLs fed to weighted_loss.
    double likelihood = 0.0;
    for (const auto& row : eps) {
        const WeightSample sample = weights_from_eps(head, row);
        std::vector<double> nll(6);
        for (std::size_t i = 0; i < 6; ++i) {
            const double p = forward(head, features[i], sample);
            nll[i] = -(labels[i] * std::log(p) + (1 - labels[i]) * std::log(1.0 - p));
        }
        likelihood += weighted_loss(att, nll);
    }
    likelihood /= 3.0;
    CHECK(res.likelihood == Catch::Approx(likelihood).margin(1e-12));
    CHECK(res.loss == Catch::Approx(0.25 * res.kl_mc + likelihood).margin(1e-12));
}

TEST_CASE("aggregate_bag is permutation-invariant up to the tie break") {
    DetRng rng(14);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<InstancePrediction> preds;
        std::set<double> used;
        for (std::size_t i = 0; i < n; ++i) {
            double mean = rng.uniform();
            while (used.contains(mean)) mean = rng.uniform(); // distinct, so order is unique
            used.insert(mean);
            preds.push_back(pred_of(mean, rng.uniform()));
        }
        const std::size_t k = 1 + rng.below(n + 2);
        const BagPrediction base = aggregate_bag(preds, k);

        std::vector<InstancePrediction> shuffled = preds;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        const BagPrediction again = aggregate_bag(shuffled, k);
        REQUIRE(again.prediction == base.prediction);
        REQUIRE(again.confidence == base.confidence);
        REQUIRE(base.prediction >= 0.0);
        REQUIRE(base.prediction <= 1.0);
        REQUIRE(base.confidence >= 0.0);
        REQUIRE(base.confidence <= 1.0);
        REQUIRE(base.top_indices.size() == std::min(k, preds.size()));
        for (std::size_t i = 1; i < base.top_indices.size(); ++i)
            REQUIRE(preds[base.top_indices[i - 1]].mean >= preds[base.top_indices[i]].mean);
    }
}
