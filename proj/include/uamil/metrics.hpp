#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "uamil/errors.hpp"

namespace uamil {

/// Parallel score/label lists with optional per-item confidence.
struct ScoredSet {
    std::vector<double> scores;        // in [0, 1]
    std::vector<int> labels;           // 0 or 1
    std::vector<double> confidences;   // optional, same length when present

    void validate() const {
        if (scores.size() != labels.size())
            throw ShapeError("scored set: score/label length mismatch");
        if (!confidences.empty() && confidences.size() != scores.size())
            throw ShapeError("scored set: confidence length mismatch");
    }

    std::size_t size() const { return scores.size(); }
};

/// F1 at the given decision threshold (prediction = score >= threshold).
/// Returns 0 when precision + recall is zero.
inline double f_score(const ScoredSet& set, double threshold = 0.5) {
    set.validate();
    if (set.size() == 0) throw MetricError("f_score: empty input");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const bool pred = set.scores[i] >= threshold;
        if (pred && set.labels[i] == 1) ++tp;
        else if (pred && set.labels[i] == 0) ++fp;
        else if (!pred && set.labels[i] == 1) ++fn;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

/// Exact AUC-ROC as the Mann-Whitney statistic:
/// (#{pos > neg} + 0.5 * #{pos = neg}) / (n_pos * n_neg).
inline double auc_roc(const ScoredSet& set) {
    set.validate();
    std::size_t n_pos = 0, n_neg = 0;
    for (int label : set.labels) (label == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("auc_roc: both classes required");

    // Sort scores of each class, then count ordered pairs with one sweep.
    std::vector<double> pos, neg;
    pos.reserve(n_pos);
    neg.reserve(n_neg);
    for (std::size_t i = 0; i < set.size(); ++i)
        (set.labels[i] == 1 ? pos : neg).push_back(set.scores[i]);
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());

    // All pairwise contributions are multiples of 0.5, so the accumulation
    // below is exact in double precision and matches brute-force counting.
    double numerator = 0.0;
    for (double p : pos) {
        const auto lower =
            static_cast<double>(std::lower_bound(neg.begin(), neg.end(), p) - neg.begin());
        const auto upper =
            static_cast<double>(std::upper_bound(neg.begin(), neg.end(), p) - neg.begin());
        numerator += lower + 0.5 * (upper - lower);
    }
    return numerator / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Step-function average precision over descending-score ranks. Ties are
/// broken by stable input order, making the value deterministic.
inline double average_precision(const ScoredSet& set) {
    set.validate();
    std::size_t n_pos = 0;
    for (int label : set.labels) n_pos += static_cast<std::size_t>(label == 1);
    if (n_pos == 0) throw MetricError("average_precision: no positives");

    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return set.scores[a] > set.scores[b];
    });

    double ap = 0.0;
    std::size_t tp = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (set.labels[order[rank]] != 1) continue;
        ++tp;
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double recall_prev = static_cast<double>(tp - 1) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(rank + 1);
        ap += (recall - recall_prev) * precision;
    }
    return ap;
}

struct CalibrationRow {
    double threshold = 0.0;             // confidence percentile value
    std::optional<double> accuracy;     // empty when nothing is retained
    double coverage = 0.0;              // retained fraction of the set
};

namespace detail {

/// Percentile with linear interpolation between closest ranks.
inline double percentile(std::vector<double> sorted, double p) {
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace detail

/// Accuracy over the subset whose confidence is at or above each percentile
/// of the confidence distribution, plus the retained fraction.
inline std::vector<CalibrationRow> calibration_curve(
    const ScoredSet& set,
    const std::vector<double>& percentiles = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90}) {
    set.validate();
    if (set.confidences.empty())
        throw ValueError("calibration_curve: confidences required");
    if (set.size() == 0) throw MetricError("calibration_curve: empty input");

    std::vector<double> sorted = set.confidences;
    std::sort(sorted.begin(), sorted.end());

    std::vector<CalibrationRow> rows;
    rows.reserve(percentiles.size());
    for (double p : percentiles) {
        const double threshold = detail::percentile(sorted, p);
        std::size_t kept = 0, correct = 0;
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set.confidences[i] < threshold) continue;
            ++kept;
            const int pred = set.scores[i] >= 0.5 ? 1 : 0;
            correct += static_cast<std::size_t>(pred == set.labels[i]);
        }
        CalibrationRow row;
        row.threshold = threshold;
        row.coverage = static_cast<double>(kept) / static_cast<double>(set.size());
        if (kept > 0)
            row.accuracy = static_cast<double>(correct) / static_cast<double>(kept);
        rows.push_back(row);
    }
    return rows;
}

} // namespace uamil
