#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "uamil/bayes_head.hpp"
#include "uamil/rng.hpp"

using namespace uamil;

namespace {

double rho_for_sigma(double sigma) { return std::log(std::exp(sigma) - 1.0); }

VariationalHead random_head(DetRng& rng, std::size_t in_dim = 32, std::size_t hidden = 8) {
    VariationalHead head(in_dim, hidden);
    for (std::size_t i = 0; i < head.weight_count(); ++i) {
        head.mu[i] = 2.0 * rng.uniform() - 1.0;               // |mu| <= 1
        head.rho[i] = rho_for_sigma(0.5 + 1.5 * rng.uniform()); // sigma in [0.5, 2]
    }
    return head;
}

bool grads_close(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) <= 1e-4 * denom + 1e-8;
}

} // namespace

TEST_CASE("sample_weights collapses to mu as sigma goes to zero") {
    VariationalHead head(2, 2);
    DetRng mu_rng(8);
    for (auto& m : head.mu) m = mu_rng.normal();
    for (auto& r : head.rho) r = -40.0;
    DetRng rng(1);
    const WeightSample s = sample_weights(head, rng);
    for (std::size_t i = 0; i < head.weight_count(); ++i)
        REQUIRE(std::abs(s.w[i] - head.mu[i]) < 1e-12);
    CHECK(s.log_q > 100.0); // entropy term diverges positively, stays finite
    CHECK(std::isfinite(s.log_q));
}

TEST_CASE("sampled scalar weight has standard-normal moments") {
    VariationalHead head(1, 1); // 4 weights
    for (auto& m : head.mu) m = 0.0;
    for (auto& r : head.rho) r = rho_for_sigma(1.0);
    DetRng rng(99);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const WeightSample s = sample_weights(head, rng);
        sum += s.w[0];
        sumsq += s.w[0] * s.w[0];
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sumsq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("same RNG state reproduces the sample bit for bit") {
    DetRng hrng(4);
    const VariationalHead head = random_head(hrng, 8, 4);
    DetRng a(321), b(321);
    const WeightSample sa = sample_weights(head, a);
    const WeightSample sb = sample_weights(head, b);
    REQUIRE(sa.w == sb.w);
    REQUIRE(sa.log_q == sb.log_q);
    REQUIRE(sa.log_p == sb.log_p);
}

TEST_CASE("forward with all-zero weights outputs one half") {
    VariationalHead head(5, 3);
    WeightSample s;
    s.w.assign(head.weight_count(), 0.0);
    const std::vector<double> feature = {0.3, -2.0, 1.0, 0.0, 4.0};
    CHECK(forward(head, feature, s) == 0.5);
}

TEST_CASE("forward output stays strictly inside (0,1)") {
    VariationalHead head(2, 2);
    WeightSample s;
    s.w.assign(head.weight_count(), 50.0); // drives the logit far positive
    const std::vector<double> feature = {100.0, 100.0};
    const double hi = forward(head, feature, s);
    CHECK(hi < 1.0);
    CHECK(hi > 0.0);
    for (auto& w : s.w) w = -50.0;
    const double lo = forward(head, feature, s);
    // negative W1 + negative bias keeps hidden at zero, so only b2 drives it
    CHECK(lo > 0.0);
    CHECK(lo < 1.0);

    WeightSample saturating;
    saturating.w.assign(head.weight_count(), 0.0);
    saturating.w[head.off_b2()] = -1000.0;
    const double tiny = forward(head, feature, saturating);
    CHECK(tiny > 0.0);
    CHECK(tiny < 1.0);
}

TEST_CASE("single-sample loss gradients match finite differences") {
    DetRng rng(77);
    const std::size_t in_dim = 6, hidden = 4;
    const double h = 1e-5;
    for (int draw = 0; draw < 3; ++draw) {
        VariationalHead head = random_head(rng, in_dim, hidden);
        std::vector<std::vector<double>> features(3, std::vector<double>(in_dim));
        std::vector<int> labels(3);
        for (auto& f : features)
            for (double& v : f) v = rng.normal();
        for (auto& y : labels) y = static_cast<int>(rng.below(2));

        // Common random numbers: one fixed noise matrix for every evaluation.
        std::vector<std::vector<double>> eps(2, std::vector<double>(head.weight_count()));
        for (auto& row : eps)
            for (double& e : row) e = rng.normal();

        const ElboResult res = elbo_core(features, labels, head, eps, nullptr, 1.0, 1.0);
        auto loss_at = [&](const VariationalHead& h2) {
            return elbo_core(features, labels, h2, eps, nullptr, 1.0, 1.0).loss;
        };

        for (int c = 0; c < 40; ++c) {
            const std::size_t idx = rng.below(head.weight_count());
            VariationalHead plus = head, minus = head;
            plus.mu[idx] += h;
            minus.mu[idx] -= h;
            const double fd_mu = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
            INFO("mu index " << idx);
            REQUIRE(grads_close(res.grad_mu[idx], fd_mu));

            VariationalHead rplus = head, rminus = head;
            rplus.rho[idx] += h;
            rminus.rho[idx] -= h;
            const double fd_rho = (loss_at(rplus) - loss_at(rminus)) / (2.0 * h);
            INFO("rho index " << idx);
            REQUIRE(grads_close(res.grad_rho[idx], fd_rho));
        }

        // Feature gradients, same oracle.
        for (int c = 0; c < 10; ++c) {
            const std::size_t i = rng.below(features.size());
            const std::size_t j = rng.below(in_dim);
            auto fplus = features, fminus = features;
            fplus[i][j] += h;
            fminus[i][j] -= h;
            const double fd =
                (elbo_core(fplus, labels, head, eps, nullptr, 1.0, 1.0).loss -
                 elbo_core(fminus, labels, head, eps, nullptr, 1.0, 1.0).loss) /
                (2.0 * h);
            REQUIRE(grads_close(res.grad_features[i][j], fd));
        }
    }
}

TEST_CASE("kl_closed_form worked examples") {
    SECTION("identical distributions give zero") {
        VariationalHead head(1, 1);
        for (auto& m : head.mu) m = 0.0;
        for (auto& r : head.rho) r = rho_for_sigma(1.0);
        head.prior_sigma = 1.0;
        CHECK(kl_closed_form(head) == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("single non-zero mean weight gives mu^2/2") {
        VariationalHead head(1, 1);
        for (auto& m : head.mu) m = 0.0;
        for (auto& r : head.rho) r = rho_for_sigma(1.0);
        head.mu[0] = 0.5;
        CHECK(kl_closed_form(head) == Catch::Approx(0.125).margin(1e-12));
    }
    SECTION("non-negative for random heads") {
        DetRng rng(13);
        for (int trial = 0; trial < 1000; ++trial) {
            const VariationalHead head = random_head(rng, 4, 2);
            REQUIRE(kl_closed_form(head) >= 0.0);
        }
    }
}

TEST_CASE("monte-carlo KL estimate approaches the closed form") {
    // mu = 0.5 on one weight, sigma = 1 everywhere: KL = mu^2/2 = 0.125.
    VariationalHead head(1, 1);
    for (auto& m : head.mu) m = 0.0;
    for (auto& r : head.rho) r = rho_for_sigma(1.0);
    head.mu[0] = 0.5;
    DetRng rng(31415);
    const std::vector<std::vector<double>> features = {{0.0}};
    const std::vector<int> labels = {0};
    const ElboResult res = elbo_loss(features, labels, head, 10000, rng);
    CHECK(std::abs(res.kl_mc - 0.125) / 0.125 < 0.05);
}

TEST_CASE("monte-carlo KL within 5% of closed form for random heads") {
    DetRng rng(515);
    const std::vector<std::vector<double>> features = {{std::vector<double>(32, 0.0)}};
    const std::vector<int> labels = {0};
    for (int trial = 0; trial < 3; ++trial) {
        const VariationalHead head = random_head(rng);
        const double exact = kl_closed_form(head);
        const ElboResult res = elbo_loss(features, labels, head, 10000, rng);
        REQUIRE(std::abs(res.kl_mc - exact) / exact < 0.05);
    }
}

TEST_CASE("at vanishing sigma the KL's mean-dependent part is sum mu^2/2") {
    // The entropy terms diverge as sigma -> 0 but do not depend on mu, so
    // they cancel exactly between a head and its zero-mean copy under
    // common noise; what remains is the prior's quadratic penalty.
    DetRng rng(6);
    VariationalHead head(2, 2);
    double expected = 0.0;
    for (std::size_t i = 0; i < head.weight_count(); ++i) {
        head.mu[i] = rng.normal();
        head.rho[i] = -40.0;
        expected += 0.5 * head.mu[i] * head.mu[i];
    }
    VariationalHead zero = head;
    for (auto& m : zero.mu) m = 0.0;

    std::vector<std::vector<double>> eps(4, std::vector<double>(head.weight_count()));
    for (auto& row : eps)
        for (double& e : row) e = rng.normal();
    const std::vector<std::vector<double>> features = {{0.0, 0.0}};
    const std::vector<int> labels = {0};
    const double kl_head = elbo_core(features, labels, head, eps, nullptr, 1.0, 1.0).kl_mc;
    const double kl_zero = elbo_core(features, labels, zero, eps, nullptr, 1.0, 1.0).kl_mc;
    CHECK(kl_head - kl_zero == Catch::Approx(expected).margin(1e-6));
}

TEST_CASE("confident correct predictions drive the likelihood to zero") {
    VariationalHead head(1, 1);
    for (auto& r : head.rho) r = -40.0; // deterministic weights
    head.mu = {10.0, 5.0, 10.0, 5.0};   // strongly positive logit for feature 1
    DetRng rng(3);
    const ElboResult res = elbo_loss({{1.0}}, {1}, head, 4, rng);
    CHECK(res.likelihood < 1e-9);
}

TEST_CASE("predict_mc worked examples") {
    SECTION("zero-variance head gives confidence 1") {
        VariationalHead head(2, 2);
        DetRng mu_rng(9);
        for (auto& m : head.mu) m = mu_rng.normal();
        for (auto& r : head.rho) r = -40.0;
        DetRng rng(5);
        const InstancePrediction pred = predict_mc(std::vector<double>{0.4, -0.2}, head, 30, rng);
        CHECK(pred.confidence == 1.0);
    }
    SECTION("constructed samples {0,1}") {
        CHECK(confidence_from_samples({0.0, 1.0}, 1.0) == 0.75);
        CHECK(confidence_from_samples({0.0, 1.0}, 2.0) == Catch::Approx(0.5625).margin(1e-15));
    }
    SECTION("requires at least two samples") {
        VariationalHead head(2, 2);
        DetRng rng(5);
        CHECK_THROWS_AS(predict_mc(std::vector<double>{0.0, 0.0}, head, 1, rng), ConfigError);
    }
    SECTION("same RNG state is bit-identical") {
        DetRng hrng(12);
        const VariationalHead head = random_head(hrng, 4, 2);
        const std::vector<double> feature = {0.1, 0.2, 0.3, 0.4};
        for (int trial = 0; trial < 1000; ++trial) {
            DetRng a(trial), b(trial);
            const auto pa = predict_mc(feature, head, 5, a);
            const auto pb = predict_mc(feature, head, 5, b);
            REQUIRE(pa.mean == pb.mean);
            REQUIRE(pa.confidence == pb.confidence);
            REQUIRE(pa.samples == pb.samples);
        }
    }
}

TEST_CASE("confidence is monotone in variance and in the exponent") {
    DetRng rng(44);
    for (int trial = 0; trial < 1000; ++trial) {
        const double v1 = 0.25 * rng.uniform();
        const double v2 = 0.25 * rng.uniform();
        const double k = 0.5 + 4.0 * rng.uniform();
        const double lo = std::min(v1, v2), hi = std::max(v1, v2);
        REQUIRE(std::pow(1.0 - lo, k) >= std::pow(1.0 - hi, k));

        const double k2 = k + rng.uniform();
        const double var = 0.01 + 0.24 * rng.uniform(); // strictly positive
        REQUIRE(std::pow(1.0 - var, k2) < std::pow(1.0 - var, k));
    }
}

TEST_CASE("prediction mean equals the sample mean and bounds hold") {
    DetRng hrng(21);
    const VariationalHead head = random_head(hrng, 4, 2);
    DetRng rng(22);
    const std::vector<double> feature = {1.0, -1.0, 0.5, 2.0};
    const InstancePrediction pred = predict_mc(feature, head, 30, rng);
    double mean = 0.0;
    for (double s : pred.samples) mean += s;
    mean /= static_cast<double>(pred.samples.size());
    CHECK(pred.mean == mean);
    CHECK(pred.mean >= 0.0);
    CHECK(pred.mean <= 1.0);
    CHECK(pred.confidence >= std::pow(0.75, head.k));
    CHECK(pred.confidence <= 1.0);
}
