#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "uamil/bayes_head.hpp"
#include "uamil/errors.hpp"
#include "uamil/rng.hpp"
#include "uamil/series.hpp"

namespace uamil {

/// Position of one instance inside a bag list.
struct InstanceRef {
    std::size_t bag = 0;
    std::size_t instance = 0;
    int pseudo_label = 0;
};

/// Draws n_neg instances uniformly with replacement from negative-bag
/// instances and n_pos from positive-bag instances, then shuffles the
/// combined order. Deterministic given the RNG state.
inline std::vector<InstanceRef> sample_batch(const std::vector<Bag>& bags, DetRng& rng,
                                             std::size_t n_neg = 200, std::size_t n_pos = 400) {
    std::vector<InstanceRef> neg_pool, pos_pool;
    for (std::size_t b = 0; b < bags.size(); ++b) {
        auto& pool = bags[b].label == 1 ? pos_pool : neg_pool;
        for (std::size_t i = 0; i < bags[b].instances.size(); ++i)
            pool.push_back({b, i, bags[b].label});
    }
    if (n_neg > 0 && neg_pool.empty())
        throw DataError("sample_batch: no negative instances available");
    if (n_pos > 0 && pos_pool.empty())
        throw DataError("sample_batch: no positive instances available");

    std::vector<InstanceRef> batch;
    batch.reserve(n_neg + n_pos);
    for (std::size_t i = 0; i < n_neg; ++i) batch.push_back(neg_pool[rng.below(neg_pool.size())]);
    for (std::size_t i = 0; i < n_pos; ++i) batch.push_back(pos_pool[rng.below(pos_pool.size())]);
    for (std::size_t i = batch.size(); i > 1; --i)
        std::swap(batch[i - 1], batch[rng.below(i)]);
    return batch;
}

enum class MedianScope { positives, all };

/// Per-instance attention under the batch threshold beta.
struct AttentionBatch {
    std::vector<int> pseudo_labels;
    std::vector<double> predictions;  // y-bar
    std::vector<double> confidences;  // c-hat
    std::vector<double> attention;
    double beta = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

/// Attention rule: pseudo-negatives always get 1; pseudo-positives get their
/// confidence-weighted prediction c*y when it reaches the batch threshold
/// beta and 0 otherwise. beta is the median of the c*y scores, taken over
/// the pseudo-positive instances by default.
inline AttentionBatch assign_attention(const std::vector<double>& predictions,
                                       const std::vector<double>& confidences,
                                       const std::vector<int>& pseudo_labels,
                                       MedianScope scope = MedianScope::positives) {
    const std::size_t n = predictions.size();
    if (confidences.size() != n || pseudo_labels.size() != n)
        throw ShapeError("assign_attention: input length mismatch");

    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = confidences[i] * predictions[i];

    std::vector<double> pool;
    for (std::size_t i = 0; i < n; ++i)
        if (scope == MedianScope::all || pseudo_labels[i] == 1) pool.push_back(scores[i]);
    if (scope == MedianScope::positives && pool.empty())
        throw DataError("assign_attention: no pseudo-positive instances, beta undefined");
    if (pool.empty()) throw DataError("assign_attention: empty batch");

    AttentionBatch out;
    out.pseudo_labels = pseudo_labels;
    out.predictions = predictions;
    out.confidences = confidences;
    out.beta = detail::median_of(std::move(pool));
    out.attention.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (pseudo_labels[i] == 0)
            out.attention[i] = 1.0;
        else
            out.attention[i] = scores[i] >= out.beta ? scores[i] : 0.0;
    }
    return out;
}

/// Attention-weighted batch mean of per-instance losses. The KL portion of
/// the objective is added separately, once per step and unweighted.
inline double weighted_loss(const AttentionBatch& batch, std::span<const double> losses) {
    if (losses.size() != batch.attention.size())
        throw ShapeError("weighted_loss: loss count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) total += batch.attention[i] * losses[i];
    return total / static_cast<double>(losses.size());
}

struct BagPrediction {
    std::string entity_id;
    double prediction = 0.0; // Y-hat
    double confidence = 0.0; // C
    std::vector<std::size_t> top_indices;
};

inline std::size_t default_top_k(std::size_t n_instances) {
    return std::max<std::size_t>(1, (n_instances + 9) / 10); // ceil(N/10)
}

/// Mean prediction/confidence over the min(K, N) instances with the largest
/// mean prediction; ties broken toward the lower instance index.
inline BagPrediction aggregate_bag(const std::vector<InstancePrediction>& predictions,
                                   std::size_t k) {
    if (predictions.empty()) throw DataError("aggregate_bag: empty bag");
    if (k == 0) throw ConfigError("aggregate_bag: K must be >= 1");
    std::vector<std::size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return predictions[a].mean > predictions[b].mean;
    });
    const std::size_t take = std::min(k, predictions.size());

    BagPrediction out;
    out.top_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    double sum_pred = 0.0, sum_conf = 0.0;
    for (std::size_t idx : out.top_indices) {
        sum_pred += predictions[idx].mean;
        sum_conf += predictions[idx].confidence;
    }
    out.prediction = sum_pred / static_cast<double>(take);
    out.confidence = sum_conf / static_cast<double>(take);
    return out;
}

} // namespace uamil
