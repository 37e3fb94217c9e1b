#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "uamil/errors.hpp"
#include "uamil/rng.hpp"

namespace uamil {

// Variational Bayesian binary classifier over instance features: a two-layer
// head (in_dim -> hidden -> 1, ReLU between, logistic output) whose weights
// carry fully-factorized Gaussian posteriors q(w) = N(mu, softplus(rho)^2)
// under a N(0, prior_sigma^2) prior. Training follows the reparameterization
// w = mu + softplus(rho) * eps, so gradients flow to mu and rho through eps.

inline constexpr double kSigmaFloor = 1e-12;
inline constexpr double kLogDensityClamp = 1e12;
inline constexpr double kProbEps = 1e-12;
inline constexpr double kHalfLogTwoPi = 0.9189385332046727; // ln(2*pi)/2

struct VariationalHead {
    std::size_t in_dim = 0;
    std::size_t hidden = 16;
    std::vector<double> mu;
    std::vector<double> rho;
    double prior_sigma = 1.0;
    double k = 2.0;          // confidence exponent
    int j_train = 10;
    int j_eval = 30;

    VariationalHead() = default;
    explicit VariationalHead(std::size_t input_dim, std::size_t hidden_dim = 16)
        : in_dim(input_dim), hidden(hidden_dim) {
        mu.assign(weight_count(), 0.0);
        rho.assign(weight_count(), -2.25); // sigma starts near 0.1
    }

    std::size_t weight_count() const { return hidden * in_dim + hidden + hidden + 1; }

    // Flat weight layout: W1 (hidden x in_dim), b1, W2 (1 x hidden), b2.
    std::size_t off_b1() const { return hidden * in_dim; }
    std::size_t off_w2() const { return off_b1() + hidden; }
    std::size_t off_b2() const { return off_w2() + hidden; }

    /// sigma = softplus(rho), floored so density terms stay finite. The
    /// reparameterized sample itself uses the raw softplus, so w collapses
    /// onto mu as rho -> -inf.
    double sigma(std::size_t i) const { return sigma_of_rho(rho[i]); }

    static double raw_sigma_of_rho(double rho_value) {
        return rho_value > 30.0 ? rho_value : std::log1p(std::exp(rho_value));
    }

    static double sigma_of_rho(double rho_value) {
        const double sp = raw_sigma_of_rho(rho_value);
        return sp < kSigmaFloor ? kSigmaFloor : sp;
    }

    /// d sigma / d rho; zero where the floor is active.
    static double dsigma_of_rho(double rho_value) {
        const double sp = rho_value > 30.0 ? rho_value : std::log1p(std::exp(rho_value));
        if (sp < kSigmaFloor) return 0.0;
        return 1.0 / (1.0 + std::exp(-rho_value));
    }

    /// mu uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, rho at the
    /// constructor default (small initial sigma).
    void init(DetRng& rng) {
        const double b1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
        const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (std::size_t i = 0; i < off_w2(); ++i) mu[i] = (2.0 * rng.uniform() - 1.0) * b1;
        for (std::size_t i = off_w2(); i < weight_count(); ++i)
            mu[i] = (2.0 * rng.uniform() - 1.0) * b2;
    }

    bool all_finite() const {
        for (double v : mu)
            if (!std::isfinite(v)) return false;
        for (double v : rho)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct WeightSample {
    std::vector<double> w;
    std::vector<double> eps;
    double log_q = 0.0;
    double log_p = 0.0;
};

struct InstancePrediction {
    double mean = 0.0;
    double confidence = 0.0;
    std::vector<double> samples;
};

namespace detail {

inline double clamp_log_density(double v) {
    if (v > kLogDensityClamp) return kLogDensityClamp;
    if (v < -kLogDensityClamp) return -kLogDensityClamp;
    return v;
}

} // namespace detail

/// Builds the weight sample w = mu + sigma * eps for given noise and
/// evaluates log q(w|theta) and log p(w) at it.
inline WeightSample weights_from_eps(const VariationalHead& head, std::vector<double> eps) {
    const std::size_t n = head.weight_count();
    if (eps.size() != n) throw ShapeError("weights_from_eps: wrong noise length");
    WeightSample s;
    s.w.resize(n);
    double log_q = 0.0, log_p = 0.0;
    const double prior_var2 = 2.0 * head.prior_sigma * head.prior_sigma;
    const double log_prior_sigma = std::log(head.prior_sigma);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = head.mu[i] + VariationalHead::raw_sigma_of_rho(head.rho[i]) * eps[i];
        s.w[i] = w;
        log_q += -kHalfLogTwoPi - std::log(head.sigma(i)) - 0.5 * eps[i] * eps[i];
        log_p += -kHalfLogTwoPi - log_prior_sigma - w * w / prior_var2;
    }
    s.log_q = detail::clamp_log_density(log_q);
    s.log_p = detail::clamp_log_density(log_p);
    s.eps = std::move(eps);
    return s;
}

inline WeightSample sample_weights(const VariationalHead& head, DetRng& rng) {
    std::vector<double> eps(head.weight_count());
    for (double& e : eps) e = rng.normal();
    return weights_from_eps(head, std::move(eps));
}

namespace detail {

struct HeadTrace {
    std::vector<double> a1; // pre-ReLU hidden activations
    double logit = 0.0;
    double prob = 0.0; // clamped to (0, 1)
};

inline double head_forward(const VariationalHead& head, std::span<const double> feature,
                           std::span<const double> w, HeadTrace* trace) {
    if (feature.size() != head.in_dim)
        throw ShapeError("head forward: feature length " + std::to_string(feature.size()) +
                         " != in_dim " + std::to_string(head.in_dim));
    const std::size_t h = head.hidden;
    std::vector<double> a1(h);
    for (std::size_t j = 0; j < h; ++j) {
        double acc = w[head.off_b1() + j];
        const double* row = w.data() + j * head.in_dim;
        for (std::size_t i = 0; i < head.in_dim; ++i) acc += row[i] * feature[i];
        a1[j] = acc;
    }
    double logit = w[head.off_b2()];
    for (std::size_t j = 0; j < h; ++j)
        logit += w[head.off_w2() + j] * (a1[j] > 0.0 ? a1[j] : 0.0);
    double prob = 1.0 / (1.0 + std::exp(-logit));
    if (prob < kProbEps) prob = kProbEps;
    if (prob > 1.0 - kProbEps) prob = 1.0 - kProbEps;
    if (trace) {
        trace->a1 = std::move(a1);
        trace->logit = logit;
        trace->prob = prob;
    }
    return prob;
}

/// Accumulates d(dlogit * logit)/dw into g_w and, when g_f is non-empty,
/// d/d(feature) into g_f.
inline void head_backward(const VariationalHead& head, std::span<const double> feature,
                          std::span<const double> w, const HeadTrace& trace, double dlogit,
                          std::span<double> g_w, std::span<double> g_f) {
    const std::size_t h = head.hidden;
    g_w[head.off_b2()] += dlogit;
    for (std::size_t j = 0; j < h; ++j) {
        const double relu = trace.a1[j] > 0.0 ? trace.a1[j] : 0.0;
        g_w[head.off_w2() + j] += dlogit * relu;
        if (!(trace.a1[j] > 0.0)) continue;
        const double ga = dlogit * w[head.off_w2() + j];
        g_w[head.off_b1() + j] += ga;
        for (std::size_t i = 0; i < head.in_dim; ++i) {
            g_w[j * head.in_dim + i] += ga * feature[i];
            if (!g_f.empty()) g_f[i] += w[j * head.in_dim + i] * ga;
        }
    }
}

} // namespace detail

/// Single-sample forward pass: affine -> ReLU -> affine -> logistic.
inline double forward(const VariationalHead& head, std::span<const double> feature,
                      const WeightSample& sample) {
    return detail::head_forward(head, feature, sample.w, nullptr);
}

/// KL(q || prior) in closed form for the factorized Gaussian family.
inline double kl_closed_form(const VariationalHead& head) {
    double total = 0.0;
    const double ps = head.prior_sigma;
    for (std::size_t i = 0; i < head.weight_count(); ++i) {
        const double sigma = head.sigma(i);
        const double mu = head.mu[i];
        total += std::log(ps / sigma) + (sigma * sigma + mu * mu) / (2.0 * ps * ps) - 0.5;
    }
    return total;
}

struct ElboResult {
    double loss = 0.0;
    double kl_mc = 0.0;      // MC average of log q - log p, unscaled
    double likelihood = 0.0; // negative log-likelihood portion as summed into the loss
    std::vector<double> grad_mu;
    std::vector<double> grad_rho;
    std::vector<std::vector<double>> grad_features;
};

/// Core Monte-Carlo objective shared by the plain and attention-weighted
/// losses. `eps` holds one noise row per Monte-Carlo sample. The KL portion
/// enters scaled by kl_scale, the Bernoulli negative log-likelihood of
/// instance i by likelihood_scale * weight_i.
inline ElboResult elbo_core(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, const VariationalHead& head,
                            const std::vector<std::vector<double>>& eps,
                            const std::vector<double>* weights, double likelihood_scale,
                            double kl_scale) {
    const std::size_t batch = features.size();
    if (batch == 0) throw ValueError("elbo: empty batch");
    if (labels.size() != batch) throw ShapeError("elbo: label count mismatch");
    if (weights && weights->size() != batch) throw ShapeError("elbo: weight count mismatch");
    if (eps.empty()) throw ConfigError("elbo: at least one Monte-Carlo sample required");

    const std::size_t n_w = head.weight_count();
    const auto j_count = static_cast<double>(eps.size());
    ElboResult res;
    res.grad_mu.assign(n_w, 0.0);
    res.grad_rho.assign(n_w, 0.0);
    res.grad_features.assign(batch, std::vector<double>(head.in_dim, 0.0));

    const double prior_var = head.prior_sigma * head.prior_sigma;
    std::vector<double> g_w(n_w);
    detail::HeadTrace trace;
    for (const auto& eps_row : eps) {
        const WeightSample sample = weights_from_eps(head, eps_row);
        const double kl_j = sample.log_q - sample.log_p;
        res.kl_mc += kl_j;

        std::fill(g_w.begin(), g_w.end(), 0.0);
        double nll_j = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            const double weight = weights ? (*weights)[i] : 1.0;
            const double prob = detail::head_forward(head, features[i], sample.w, &trace);
            const double y = static_cast<double>(labels[i]);
            nll_j -= weight * (y * std::log(prob) + (1.0 - y) * std::log(1.0 - prob));
            const double dlogit = likelihood_scale * weight * (trace.prob - y);
            if (dlogit != 0.0)
                detail::head_backward(head, features[i], sample.w, trace, dlogit, g_w,
                                      res.grad_features[i]);
        }
        res.likelihood += likelihood_scale * nll_j;

        // Reparameterized gradients: de/dmu = de/dw, de/drho = de/dw * eps * sigma'.
        for (std::size_t i = 0; i < n_w; ++i) {
            const double sigma = head.sigma(i);
            const double dsig = VariationalHead::dsigma_of_rho(head.rho[i]);
            const double kl_dmu = sample.w[i] / prior_var;
            const double kl_drho = (-1.0 / sigma + sample.w[i] * eps_row[i] / prior_var) * dsig;
            res.grad_mu[i] += kl_scale * kl_dmu + g_w[i];
            res.grad_rho[i] += kl_scale * kl_drho + g_w[i] * eps_row[i] * dsig;
        }
    }

    res.kl_mc /= j_count;
    res.likelihood /= j_count;
    res.loss = kl_scale * res.kl_mc + res.likelihood;
    for (double& g : res.grad_mu) g /= j_count;
    for (double& g : res.grad_rho) g /= j_count;
    for (auto& gf : res.grad_features)
        for (double& g : gf) g /= j_count;
    return res;
}

namespace detail {

inline std::vector<std::vector<double>> draw_eps(const VariationalHead& head, int j, DetRng& rng) {
    if (j < 1) throw ConfigError("elbo: sample count must be >= 1");
    std::vector<std::vector<double>> eps(static_cast<std::size_t>(j),
                                         std::vector<double>(head.weight_count()));
    for (auto& row : eps)
        for (double& e : row) e = rng.normal();
    return eps;
}

} // namespace detail

/// Monte-Carlo variational loss over a batch: mean over J samples of
/// (batch/dataset) * (log q - log p) plus the summed Bernoulli negative
/// log-likelihood under each sampled weight vector.
inline ElboResult elbo_loss(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, const VariationalHead& head,
                            int j, DetRng& rng, std::size_t dataset_size = 0) {
    const std::size_t batch = features.size();
    if (batch == 0) throw ValueError("elbo: empty batch");
    const double kl_scale =
        dataset_size == 0 ? 1.0
                          : static_cast<double>(batch) / static_cast<double>(dataset_size);
    return elbo_core(features, labels, head, detail::draw_eps(head, j, rng), nullptr, 1.0,
                     kl_scale);
}

/// Training variant: likelihood is the attention-weighted batch mean, the KL
/// portion is scaled by batch/dataset and left unweighted by attention.
inline ElboResult elbo_loss_weighted(const std::vector<std::vector<double>>& features,
                                     const std::vector<int>& labels,
                                     const std::vector<double>& attention,
                                     const VariationalHead& head, int j, DetRng& rng,
                                     std::size_t dataset_size) {
    const std::size_t batch = features.size();
    if (batch == 0) throw ValueError("elbo: empty batch");
    const double kl_scale =
        dataset_size == 0 ? 1.0
                          : static_cast<double>(batch) / static_cast<double>(dataset_size);
    return elbo_core(features, labels, head, detail::draw_eps(head, j, rng), &attention,
                     1.0 / static_cast<double>(batch), kl_scale);
}

/// Population variance of the Monte-Carlo probabilities mapped through
/// (1 - Var)^k. Samples live in [0,1] so Var <= 1/4 and the result is in
/// [(3/4)^k, 1].
inline double confidence_from_samples(const std::vector<double>& samples, double k) {
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(samples.size());
    return std::pow(1.0 - var, k);
}

/// J forward passes with fresh weight samples; mean prediction plus
/// variance-based confidence. Draws the same noise stream as
/// sample_weights but skips the density bookkeeping predictions never use.
inline InstancePrediction predict_mc(std::span<const double> feature,
                                     const VariationalHead& head, int j, DetRng& rng) {
    if (j < 2) throw ConfigError("predict_mc: need at least 2 samples for a variance");
    const std::size_t n = head.weight_count();
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i)
        sigma[i] = VariationalHead::raw_sigma_of_rho(head.rho[i]);

    InstancePrediction pred;
    pred.samples.resize(static_cast<std::size_t>(j));
    std::vector<double> w(n);
    for (auto& s : pred.samples) {
        for (std::size_t i = 0; i < n; ++i) w[i] = head.mu[i] + sigma[i] * rng.normal();
        s = detail::head_forward(head, feature, w, nullptr);
    }
    double mean = 0.0;
    for (double s : pred.samples) mean += s;
    pred.mean = mean / static_cast<double>(j);
    pred.confidence = confidence_from_samples(pred.samples, head.k);
    return pred;
}

} // namespace uamil
