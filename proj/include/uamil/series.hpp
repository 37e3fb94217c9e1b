#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uamil/errors.hpp"
#include "uamil/matrix.hpp"

namespace uamil {

/// One entity's M-channel trajectory. Timestamps are UTC epoch seconds and
/// strictly increasing; every channel has the same length and only finite
/// values. All invariants are checked at construction, after which the
/// object is immutable by convention.
struct MultivariateSeries {
    std::string entity_id;
    std::vector<double> timestamps;
    std::vector<std::string> channel_names;
    Matrix values; // M x T

    MultivariateSeries(std::string id, std::vector<double> ts,
                       std::vector<std::string> names, Matrix vals)
        : entity_id(std::move(id)),
          timestamps(std::move(ts)),
          channel_names(std::move(names)),
          values(std::move(vals)) {
        if (values.rows() != channel_names.size())
            throw SchemaError("series '" + entity_id + "': " +
                              std::to_string(channel_names.size()) + " channel names for " +
                              std::to_string(values.rows()) + " channels");
        if (values.cols() == 0)
            throw ValueError("series '" + entity_id + "': empty (T must be >= 1)");
        if (timestamps.size() != values.cols())
            throw ShapeError("series '" + entity_id + "': timestamp count " +
                             std::to_string(timestamps.size()) + " != length " +
                             std::to_string(values.cols()));
        for (std::size_t i = 1; i < timestamps.size(); ++i)
            if (!(timestamps[i] > timestamps[i - 1]))
                throw ValueError("series '" + entity_id +
                                 "': timestamps not strictly increasing at index " +
                                 std::to_string(i));
        if (!values.all_finite())
            throw ValueError("series '" + entity_id + "': non-finite channel value");
    }

    std::size_t length() const { return values.cols(); }
    std::size_t channel_count() const { return values.rows(); }

    std::size_t channel_index(const std::string& name) const {
        auto it = std::find(channel_names.begin(), channel_names.end(), name);
        if (it == channel_names.end())
            throw SchemaError("series '" + entity_id + "': missing channel '" + name + "'");
        return static_cast<std::size_t>(it - channel_names.begin());
    }
};

/// One fixed-width window of a bag; pseudo label is inherited from the bag,
/// the true label is only known for synthetic data.
struct Instance {
    std::string bag_id;
    std::size_t index = 0;
    Matrix window; // M x W
    int pseudo_label = 0;
    std::optional<int> true_label;

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// A labeled full sequence split into non-overlapping instances.
struct Bag {
    std::string series_ref;
    int label = 0;
    std::vector<Instance> instances;

    friend bool operator==(const Bag&, const Bag&) = default;
};

/// Per-channel z-score parameters, fit on the training split only.
/// Population (not sample) standard deviation.
class Normalizer {
public:
    Normalizer() = default;
    Normalizer(std::vector<std::string> names, std::vector<double> means,
               std::vector<double> stds)
        : names_(std::move(names)), means_(std::move(means)), stds_(std::move(stds)) {
        if (names_.size() != means_.size() || names_.size() != stds_.size())
            throw ShapeError("normalizer: mismatched parameter lengths");
        for (std::size_t i = 0; i < stds_.size(); ++i)
            if (!(stds_[i] > 0.0))
                throw FitError("normalizer: non-positive std for channel '" + names_[i] + "'");
    }

    const std::vector<std::string>& channel_names() const { return names_; }
    const std::vector<double>& means() const { return means_; }
    const std::vector<double>& stds() const { return stds_; }
    std::size_t channel_count() const { return names_.size(); }

    /// Normalizes rows of an M x * matrix in place, matching channels by row
    /// index. Used on pre-segmented windows, where names are positional.
    void apply_rows(Matrix& m) const {
        if (m.rows() != names_.size())
            throw SchemaError("normalizer: matrix has " + std::to_string(m.rows()) +
                              " channels, normalizer has " + std::to_string(names_.size()));
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                m.at(r, c) = (m.at(r, c) - means_[r]) / stds_[r];
    }

private:
    std::vector<std::string> names_;
    std::vector<double> means_;
    std::vector<double> stds_;
};

/// Converts [lat, lon, sog, cog] to [lat, lon, vx, vy]. COG is degrees
/// clockwise from true north, so the eastward component uses the sine.
inline MultivariateSeries derive_kinematics(const MultivariateSeries& series) {
    const std::size_t i_lat = series.channel_index("lat");
    const std::size_t i_lon = series.channel_index("lon");
    const std::size_t i_sog = series.channel_index("sog");
    const std::size_t i_cog = series.channel_index("cog");

    const std::size_t t_len = series.length();
    Matrix out(4, t_len);
    constexpr double deg = std::numbers::pi / 180.0;
    for (std::size_t t = 0; t < t_len; ++t) {
        const double sog = series.values.at(i_sog, t);
        const double cog = series.values.at(i_cog, t);
        if (!std::isfinite(sog) || !std::isfinite(cog))
            throw ValueError("series '" + series.entity_id + "': non-finite sog/cog");
        if (sog < 0.0)
            throw ValueError("series '" + series.entity_id + "': negative sog");
        out.at(0, t) = series.values.at(i_lat, t);
        out.at(1, t) = series.values.at(i_lon, t);
        out.at(2, t) = sog * std::sin(cog * deg);
        out.at(3, t) = sog * std::cos(cog * deg);
    }
    return {series.entity_id, series.timestamps, {"lat", "lon", "vx", "vy"}, std::move(out)};
}

namespace detail {

inline std::pair<double, double> mean_and_population_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

} // namespace detail

/// Fits per-channel mean/std over the concatenation of all series. Requires
/// matching channel names across the set and at least two total timestamps.
inline Normalizer fit_normalizer(const std::vector<MultivariateSeries>& training) {
    if (training.empty()) throw FitError("fit_normalizer: empty training set");
    const auto& names = training.front().channel_names;
    for (const auto& s : training)
        if (s.channel_names != names)
            throw SchemaError("fit_normalizer: channel names differ across series");

    std::vector<double> means(names.size()), stds(names.size());
    for (std::size_t ch = 0; ch < names.size(); ++ch) {
        std::vector<double> pooled;
        for (const auto& s : training)
            pooled.insert(pooled.end(), s.values.row(ch), s.values.row(ch) + s.length());
        if (pooled.size() < 2)
            throw FitError("fit_normalizer: fewer than 2 values for channel '" + names[ch] + "'");
        auto [mean, std] = detail::mean_and_population_std(pooled);
        if (!(std > 0.0))
            throw FitError("fit_normalizer: zero variance in channel '" + names[ch] + "'");
        means[ch] = mean;
        stds[ch] = std;
    }
    return {names, std::move(means), std::move(stds)};
}

/// Same fit over pre-segmented windows; channels are positional ("c0", "c1",
/// ...) because bag files carry no channel names.
inline Normalizer fit_normalizer_windows(const std::vector<const Matrix*>& windows) {
    if (windows.empty()) throw FitError("fit_normalizer: no windows");
    const std::size_t m = windows.front()->rows();
    std::vector<std::string> names(m);
    for (std::size_t ch = 0; ch < m; ++ch) names[ch] = "c" + std::to_string(ch);

    std::vector<double> means(m), stds(m);
    for (std::size_t ch = 0; ch < m; ++ch) {
        std::vector<double> pooled;
        for (const Matrix* w : windows) {
            if (w->rows() != m) throw SchemaError("fit_normalizer: mixed channel counts");
            pooled.insert(pooled.end(), w->row(ch), w->row(ch) + w->cols());
        }
        if (pooled.size() < 2)
            throw FitError("fit_normalizer: fewer than 2 values for channel '" + names[ch] + "'");
        auto [mean, std] = detail::mean_and_population_std(pooled);
        if (!(std > 0.0))
            throw FitError("fit_normalizer: zero variance in channel '" + names[ch] + "'");
        means[ch] = mean;
        stds[ch] = std;
    }
    return {std::move(names), std::move(means), std::move(stds)};
}

inline MultivariateSeries apply_normalizer(const MultivariateSeries& series,
                                           const Normalizer& norm) {
    if (series.channel_names != norm.channel_names())
        throw SchemaError("apply_normalizer: channel names do not match for series '" +
                          series.entity_id + "'");
    Matrix out = series.values;
    for (std::size_t ch = 0; ch < out.rows(); ++ch)
        for (std::size_t t = 0; t < out.cols(); ++t)
            out.at(ch, t) = (out.at(ch, t) - norm.means()[ch]) / norm.stds()[ch];
    return {series.entity_id, series.timestamps, series.channel_names, std::move(out)};
}

/// Splits a series into floor(T/W) non-overlapping windows at offsets
/// 0, W, 2W, ...; the trailing remainder is dropped. Instances inherit the
/// bag label as their pseudo label.
inline Bag segment(const MultivariateSeries& series, std::size_t window_len, int label) {
    if (window_len < 2) throw ConfigError("segment: window length must be >= 2");
    if (series.length() < window_len)
        throw TooShortError("segment: series '" + series.entity_id + "' has " +
                            std::to_string(series.length()) + " steps, window is " +
                            std::to_string(window_len));
    Bag bag;
    bag.series_ref = series.entity_id;
    bag.label = label;
    const std::size_t n = series.length() / window_len;
    bag.instances.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Instance inst;
        inst.bag_id = series.entity_id;
        inst.index = i;
        inst.window = series.values.slice_cols(i * window_len, window_len);
        inst.pseudo_label = label;
        bag.instances.push_back(std::move(inst));
    }
    return bag;
}

} // namespace uamil
