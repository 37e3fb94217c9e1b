#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "uamil/errors.hpp"
#include "uamil/rng.hpp"
#include "uamil/series.hpp"

namespace uamil {

// ---------------------------------------------------------------------------
// AIS records

struct AisRecord {
    std::string mmsi;
    double timestamp = 0.0; // UTC epoch seconds
    double lat = 0.0;
    double lon = 0.0;
    double sog = 0.0;
    double cog = 0.0;
    std::optional<int> vessel_type;
};

struct RejectReport {
    std::map<std::string, std::size_t> by_reason;
    std::map<std::string, std::size_t> by_mmsi; // rejected rows per vessel, when known
    std::size_t accepted = 0;

    std::size_t rejected() const {
        std::size_t total = 0;
        for (const auto& [reason, count] : by_reason) total += count;
        return total;
    }
};

struct AisCsv {
    std::vector<AisRecord> records;
    RejectReport rejects;
};

namespace detail {

/// Minimal RFC4180-style field splitter (quoted fields, doubled quotes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::optional<double> parse_double_opt(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Days since 1970-01-01 for a civil date (valid for the whole AIS era).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const int yoe = y - era * 400;
    const int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + doe - 719468;
}

/// ISO-8601 "YYYY-MM-DD[T ]HH:MM:SS" to epoch seconds; fractional seconds
/// are truncated.
inline std::optional<double> parse_iso8601(const std::string& text) {
    int y, mo, d, h, mi, s;
    char sep;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &s) != 7)
        return std::nullopt;
    if (sep != 'T' && sep != ' ') return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 ||
        s > 60)
        return std::nullopt;
    return static_cast<double>(days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s);
}

} // namespace detail

/// Streams AIS records out of a CSV file. Malformed rows are skipped and
/// tallied per reason; a missing required header column is fatal.
inline AisCsv parse_ais_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "': missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);

    const std::vector<std::string> required = {"MMSI", "BaseDateTime", "LAT",
                                               "LON",  "SOG",          "COG"};
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);
    std::string missing;
    for (const auto& name : required)
        if (!column.contains(name)) missing += missing.empty() ? name : ", " + name;
    if (!missing.empty())
        throw SchemaError("'" + path.string() + "': missing required columns: " + missing);
    const bool has_type = column.contains("VesselType");

    AisCsv out;
    const std::size_t max_index = [&] {
        std::size_t m = 0;
        for (const auto& name : required) m = std::max(m, column.at(name));
        if (has_type) m = std::max(m, column.at("VesselType"));
        return m;
    }();

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);

        const std::string mmsi =
            column.at("MMSI") < fields.size() ? fields[column.at("MMSI")] : std::string();
        auto reject = [&](const std::string& reason) {
            ++out.rejects.by_reason[reason];
            if (!mmsi.empty()) ++out.rejects.by_mmsi[mmsi];
        };

        if (fields.size() <= max_index) {
            reject("wrong field count");
            continue;
        }
        if (mmsi.empty()) {
            reject("bad mmsi");
            continue;
        }
        const auto ts = detail::parse_iso8601(fields[column.at("BaseDateTime")]);
        if (!ts) {
            reject("bad timestamp");
            continue;
        }
        const auto lat = detail::parse_double_opt(fields[column.at("LAT")]);
        const auto lon = detail::parse_double_opt(fields[column.at("LON")]);
        const auto sog = detail::parse_double_opt(fields[column.at("SOG")]);
        const auto cog = detail::parse_double_opt(fields[column.at("COG")]);
        if (!lat || !lon || !sog || !cog) {
            reject("bad number");
            continue;
        }
        if (*lat < -90.0 || *lat > 90.0) {
            reject("lat out of range");
            continue;
        }
        if (*lon < -180.0 || *lon > 180.0) {
            reject("lon out of range");
            continue;
        }
        if (*sog < 0.0) {
            reject("sog out of range");
            continue;
        }
        if (*cog < 0.0 || *cog >= 360.0) {
            reject("cog out of range");
            continue;
        }

        AisRecord rec;
        rec.mmsi = mmsi;
        rec.timestamp = *ts;
        rec.lat = *lat;
        rec.lon = *lon;
        rec.sog = *sog;
        rec.cog = *cog;
        if (has_type && column.at("VesselType") < fields.size()) {
            const std::string& type_text = fields[column.at("VesselType")];
            if (!type_text.empty()) {
                const auto type_value = detail::parse_double_opt(type_text);
                if (!type_value) {
                    reject("bad vessel type");
                    continue;
                }
                rec.vessel_type = static_cast<int>(std::llround(*type_value));
            }
        }
        out.records.push_back(std::move(rec));
        ++out.rejects.accepted;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Task mapping and bag construction

struct TaskSpec {
    std::string name;
    std::set<int> positive_type_codes;

    static TaskSpec named(const std::string& task_name) {
        if (task_name == "fishing") return {task_name, {30}};
        if (task_name == "cargo") return {task_name, range_codes(70, 79)};
        if (task_name == "tanker") return {task_name, range_codes(80, 89)};
        throw ConfigError("unknown task '" + task_name + "' (use fishing, cargo, tanker, or custom)");
    }

    static TaskSpec custom(std::set<int> codes) {
        if (codes.empty()) throw ConfigError("custom task: positive type codes must be non-empty");
        return {"custom", std::move(codes)};
    }

    bool is_positive(std::optional<int> vessel_type) const {
        return vessel_type && positive_type_codes.contains(*vessel_type);
    }

private:
    static std::set<int> range_codes(int lo, int hi) {
        std::set<int> codes;
        for (int c = lo; c <= hi; ++c) codes.insert(c);
        return codes;
    }
};

/// Groups records by MMSI into trajectories, cleans them, and segments each
/// surviving one into a labeled bag. Vessels whose reject fraction exceeds
/// max_reject_fraction (when a report is supplied) are dropped, as are
/// trajectories shorter than min_len. Output is sorted by entity id, so the
/// result does not depend on input record order.
inline std::vector<Bag> build_bags(const std::vector<AisRecord>& records, const TaskSpec& task,
                                   std::size_t min_len = 100, std::size_t window_len = 100,
                                   const RejectReport* rejects = nullptr,
                                   double max_reject_fraction = 0.10) {
    std::map<std::string, std::vector<const AisRecord*>> by_mmsi;
    for (const auto& r : records) by_mmsi[r.mmsi].push_back(&r);

    std::vector<Bag> bags;
    const std::size_t effective_min = std::max(min_len, window_len);
    for (auto& [mmsi, rows] : by_mmsi) {
        if (rejects) {
            const auto it = rejects->by_mmsi.find(mmsi);
            const double bad = it == rejects->by_mmsi.end() ? 0.0 : static_cast<double>(it->second);
            const double total = bad + static_cast<double>(rows.size());
            if (total > 0.0 && bad / total > max_reject_fraction) continue;
        }
        // Canonical order: timestamp first, then content, so duplicate
        // timestamps dedup identically for any input order.
        std::sort(rows.begin(), rows.end(), [](const AisRecord* a, const AisRecord* b) {
            return std::tie(a->timestamp, a->lat, a->lon, a->sog, a->cog, a->vessel_type) <
                   std::tie(b->timestamp, b->lat, b->lon, b->sog, b->cog, b->vessel_type);
        });
        std::vector<const AisRecord*> unique;
        for (const AisRecord* r : rows)
            if (unique.empty() || r->timestamp > unique.back()->timestamp) unique.push_back(r);
        if (unique.size() < effective_min) continue;

        std::optional<int> vessel_type;
        for (const AisRecord* r : unique)
            if (r->vessel_type) {
                vessel_type = r->vessel_type;
                break;
            }
        if (!vessel_type) continue; // unlabelable without a type code

        const std::size_t t_len = unique.size();
        Matrix values(4, t_len);
        std::vector<double> timestamps(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            timestamps[t] = unique[t]->timestamp;
            values.at(0, t) = unique[t]->lat;
            values.at(1, t) = unique[t]->lon;
            values.at(2, t) = unique[t]->sog;
            values.at(3, t) = unique[t]->cog;
        }
        MultivariateSeries series(mmsi, std::move(timestamps), {"lat", "lon", "sog", "cog"},
                                  std::move(values));
        const int label = task.is_positive(vessel_type) ? 1 : 0;
        bags.push_back(segment(derive_kinematics(series), window_len, label));
    }
    return bags;
}

// ---------------------------------------------------------------------------
// Synthetic planted-shapelet dataset (the verification oracle)

struct SyntheticConfig {
    std::size_t n_pos_bags = 200;
    std::size_t n_neg_bags = 200;
    std::size_t series_len_min = 100;
    std::size_t series_len_max = 200;
    std::size_t window_len = 25;
    std::size_t shapelet_len = 50; // steps, multiple of window_len
    double cruise_speed_mean = 12.0;
    double cruise_speed_std = 1.0;
    double cruise_heading_drift_std = 2.0; // degrees per step
    double loiter_speed_mean = 1.0;
    double loiter_speed_std = 0.5;
    double loiter_heading_drift_std = 45.0;
    double noise_std = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_pos_bags + n_neg_bags == 0) throw ConfigError("synthetic: zero bags requested");
        if (window_len < 2) throw ConfigError("synthetic: window_len must be >= 2");
        if (series_len_min < window_len)
            throw ConfigError("synthetic: series_len_min shorter than window_len");
        if (series_len_max < series_len_min)
            throw ConfigError("synthetic: series_len_max < series_len_min");
        if (shapelet_len < window_len)
            throw ConfigError("synthetic: shapelet_len shorter than window_len");
        if (shapelet_len % window_len != 0)
            throw ConfigError("synthetic: shapelet_len must be a multiple of window_len");
        if (shapelet_len > series_len_min)
            throw ConfigError("synthetic: shapelet longer than the shortest series");
        if (cruise_speed_mean < 0.0 || loiter_speed_mean < 0.0 || cruise_speed_std < 0.0 ||
            loiter_speed_std < 0.0 || noise_std < 0.0)
            throw ConfigError("synthetic: negative regime parameter");
    }
};

/// Optional paired second modality emitted alongside a synthetic dataset.
struct ModalityPairConfig {
    std::size_t feature_dim = 16;
    double signal_strength = 1.0;
    double noise_std = 1.0;
    double missing_fraction = 0.0;
    std::optional<std::uint64_t> seed; // default: dataset seed + 1
};

inline nlohmann::ordered_json synthetic_config_to_json(const SyntheticConfig& c) {
    nlohmann::ordered_json j;
    j["n_pos_bags"] = c.n_pos_bags;
    j["n_neg_bags"] = c.n_neg_bags;
    j["series_len_min"] = c.series_len_min;
    j["series_len_max"] = c.series_len_max;
    j["window_len"] = c.window_len;
    j["shapelet_len"] = c.shapelet_len;
    j["cruise_speed_mean"] = c.cruise_speed_mean;
    j["cruise_speed_std"] = c.cruise_speed_std;
    j["cruise_heading_drift_std"] = c.cruise_heading_drift_std;
    j["loiter_speed_mean"] = c.loiter_speed_mean;
    j["loiter_speed_std"] = c.loiter_speed_std;
    j["loiter_heading_drift_std"] = c.loiter_heading_drift_std;
    j["noise_std"] = c.noise_std;
    j["seed"] = c.seed;
    return j;
}

inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
    SyntheticConfig c;
    static const std::set<std::string> known = {
        "n_pos_bags", "n_neg_bags", "series_len_min", "series_len_max", "window_len",
        "shapelet_len", "cruise_speed_mean", "cruise_speed_std", "cruise_heading_drift_std",
        "loiter_speed_mean", "loiter_speed_std", "loiter_heading_drift_std", "noise_std",
        "seed", "modality_pair"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw ConfigError("synthetic config: unknown field '" + key + "'");
    c.n_pos_bags = j.value("n_pos_bags", c.n_pos_bags);
    c.n_neg_bags = j.value("n_neg_bags", c.n_neg_bags);
    c.series_len_min = j.value("series_len_min", c.series_len_min);
    c.series_len_max = j.value("series_len_max", c.series_len_max);
    c.window_len = j.value("window_len", c.window_len);
    c.shapelet_len = j.value("shapelet_len", c.shapelet_len);
    c.cruise_speed_mean = j.value("cruise_speed_mean", c.cruise_speed_mean);
    c.cruise_speed_std = j.value("cruise_speed_std", c.cruise_speed_std);
    c.cruise_heading_drift_std = j.value("cruise_heading_drift_std", c.cruise_heading_drift_std);
    c.loiter_speed_mean = j.value("loiter_speed_mean", c.loiter_speed_mean);
    c.loiter_speed_std = j.value("loiter_speed_std", c.loiter_speed_std);
    c.loiter_heading_drift_std = j.value("loiter_heading_drift_std", c.loiter_heading_drift_std);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

inline ModalityPairConfig modality_pair_config_from_json(const nlohmann::json& j) {
    ModalityPairConfig c;
    static const std::set<std::string> known = {"feature_dim", "signal_strength", "noise_std",
                                                "missing_fraction", "seed"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw ConfigError("modality_pair config: unknown field '" + key + "'");
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.missing_fraction = j.value("missing_fraction", c.missing_fraction);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace detail {

inline double wrap360(double deg) {
    const double w = deg - 360.0 * std::floor(deg / 360.0);
    return w >= 360.0 ? 0.0 : w; // guards the 359.999... rounding edge
}

} // namespace detail

/// Negative bags are cruise-regime random walks (steady heading, cruise
/// speed); positive bags carry one contiguous loiter segment (slow, erratic
/// heading) of shapelet_len planted at a window-aligned offset. Instances
/// overlapping the planted segment get true label 1. Fully deterministic
/// given the seed.
inline std::vector<Bag> generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    DetRng rng(config.seed);
    constexpr double t0 = 1577836800.0; // 2020-01-01T00:00:00Z
    constexpr double deg = std::numbers::pi / 180.0;

    std::vector<Bag> bags;
    bags.reserve(config.n_neg_bags + config.n_pos_bags);
    const std::size_t total = config.n_neg_bags + config.n_pos_bags;
    for (std::size_t b = 0; b < total; ++b) {
        const bool positive = b >= config.n_neg_bags;
        const std::size_t ordinal = positive ? b - config.n_neg_bags : b;
        char id[16];
        std::snprintf(id, sizeof(id), "%s%04zu", positive ? "pos" : "neg", ordinal);

        const std::size_t t_len =
            config.series_len_min +
            rng.below(config.series_len_max - config.series_len_min + 1);
        const std::size_t n_windows = t_len / config.window_len;
        const std::size_t shapelet_windows = config.shapelet_len / config.window_len;

        std::size_t planted_first = 0, planted_last = 0; // window indices, inclusive
        std::size_t planted_begin = 0, planted_end = 0;  // step range
        if (positive) {
            const std::size_t slots = n_windows - shapelet_windows + 1;
            planted_first = rng.below(slots);
            planted_last = planted_first + shapelet_windows - 1;
            planted_begin = planted_first * config.window_len;
            planted_end = planted_begin + config.shapelet_len;
        }

        // Tight start region: positions overlap heavily across vessels, so
        // absolute location carries no bag-identifying signal and the
        // discriminative content stays in the motion dynamics.
        double lat = 29.5 + rng.uniform();
        double lon = -80.5 + rng.uniform();
        double heading = 360.0 * rng.uniform();

        Matrix values(4, t_len);
        std::vector<double> timestamps(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            const bool loiter = positive && t >= planted_begin && t < planted_end;
            const double speed_mean = loiter ? config.loiter_speed_mean : config.cruise_speed_mean;
            const double speed_std = loiter ? config.loiter_speed_std : config.cruise_speed_std;
            const double drift_std =
                loiter ? config.loiter_heading_drift_std : config.cruise_heading_drift_std;

            const double speed = std::max(0.0, speed_mean + speed_std * rng.normal());
            heading = detail::wrap360(heading + drift_std * rng.normal());
            const double sog_obs = std::max(0.0, speed + config.noise_std * rng.normal());
            const double cog_obs = detail::wrap360(heading + config.noise_std * rng.normal());

            timestamps[t] = t0 + 60.0 * static_cast<double>(t);
            values.at(0, t) = lat;
            values.at(1, t) = lon;
            values.at(2, t) = sog_obs;
            values.at(3, t) = cog_obs;

            // One knot for one minute is 1/60 nm; one degree is 60 nm.
            lat += speed * std::cos(heading * deg) / 3600.0;
            lon += speed * std::sin(heading * deg) / 3600.0;
        }

        MultivariateSeries series(id, std::move(timestamps), {"lat", "lon", "sog", "cog"},
                                  std::move(values));
        Bag bag = segment(derive_kinematics(series), config.window_len, positive ? 1 : 0);
        for (auto& inst : bag.instances) {
            const bool in_shapelet =
                positive && inst.index >= planted_first && inst.index <= planted_last;
            inst.true_label = in_shapelet ? 1 : 0;
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

// ---------------------------------------------------------------------------
// Paired second modality (stands in for the image side)

struct ModalityFeature {
    std::string entity_id;
    std::vector<double> features;
    int label = 0;
};

/// One feature vector per bag: a label-dependent mean (+/- signal_strength
/// along a fixed direction) plus Gaussian noise. A missing_fraction of
/// entities (exact count, chosen at random) is emitted without a pair.
inline std::vector<ModalityFeature> generate_modality_pair(const std::vector<Bag>& bags,
                                                           std::size_t feature_dim,
                                                           double signal_strength,
                                                           double noise_std, std::uint64_t seed,
                                                           double missing_fraction = 0.0) {
    if (feature_dim == 0) throw ConfigError("modality pair: feature_dim must be >= 1");
    if (missing_fraction < 0.0 || missing_fraction > 1.0)
        throw ConfigError("modality pair: missing_fraction outside [0,1]");
    DetRng rng(seed);

    std::vector<double> direction(feature_dim);
    double norm = 0.0;
    for (double& u : direction) {
        u = rng.normal();
        norm += u * u;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        direction.assign(feature_dim, 0.0);
        direction[0] = 1.0;
    } else {
        for (double& u : direction) u /= norm;
    }

    const std::size_t n = bags.size();
    const auto n_missing =
        static_cast<std::size_t>(std::llround(missing_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<bool> missing(n, false);
    for (std::size_t i = 0; i < n_missing; ++i) missing[order[i]] = true;

    std::vector<ModalityFeature> out;
    out.reserve(n - n_missing);
    for (std::size_t i = 0; i < n; ++i) {
        if (missing[i]) continue;
        ModalityFeature f;
        f.entity_id = bags[i].series_ref;
        f.label = bags[i].label;
        f.features.resize(feature_dim);
        const double sign = bags[i].label == 1 ? 1.0 : -1.0;
        for (std::size_t j = 0; j < feature_dim; ++j)
            f.features[j] = sign * signal_strength * direction[j] + noise_std * rng.normal();
        out.push_back(std::move(f));
    }
    return out;
}

/// Wraps feature vectors as single-instance bags (one 1 x d window each) so
/// the full training pipeline applies to the second modality unchanged.
inline std::vector<Bag> feature_bags(const std::vector<ModalityFeature>& features) {
    std::vector<Bag> bags;
    bags.reserve(features.size());
    for (const auto& f : features) {
        Bag bag;
        bag.series_ref = f.entity_id;
        bag.label = f.label;
        Instance inst;
        inst.bag_id = f.entity_id;
        inst.index = 0;
        inst.window = Matrix(1, f.features.size());
        for (std::size_t j = 0; j < f.features.size(); ++j) inst.window.at(0, j) = f.features[j];
        inst.pseudo_label = f.label;
        inst.true_label = f.label;
        bag.instances.push_back(std::move(inst));
        bags.push_back(std::move(bag));
    }
    return bags;
}

// ---------------------------------------------------------------------------
// Bag file (JSON lines, one object per bag)

inline void write_bag_file(const std::filesystem::path& path, const std::vector<Bag>& bags) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& bag : bags) {
        nlohmann::ordered_json obj;
        obj["entity_id"] = bag.series_ref;
        obj["label"] = bag.label;
        auto windows = nlohmann::ordered_json::array();
        bool any_true = false;
        auto true_labels = nlohmann::ordered_json::array();
        for (const auto& inst : bag.instances) {
            auto window = nlohmann::ordered_json::array();
            for (std::size_t r = 0; r < inst.window.rows(); ++r) {
                auto row = nlohmann::ordered_json::array();
                for (std::size_t c = 0; c < inst.window.cols(); ++c)
                    row.push_back(inst.window.at(r, c));
                window.push_back(std::move(row));
            }
            windows.push_back(std::move(window));
            if (inst.true_label) any_true = true;
            true_labels.push_back(inst.true_label ? nlohmann::ordered_json(*inst.true_label)
                                                  : nlohmann::ordered_json(nullptr));
        }
        obj["windows"] = std::move(windows);
        obj["true_instance_labels"] =
            any_true ? std::move(true_labels) : nlohmann::ordered_json(nullptr);
        out << obj.dump() << '\n';
    }
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline std::vector<Bag> read_bag_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<Bag> bags;
    std::string line;
    std::size_t line_no = 0;
    std::size_t m = 0, w = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("'" + path.string() + "' line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        const std::string where = "'" + path.string() + "' line " + std::to_string(line_no);
        if (!obj.is_object() || !obj.contains("entity_id") || !obj.contains("label") ||
            !obj.contains("windows"))
            throw SchemaError(where + ": expected entity_id, label, windows");

        Bag bag;
        bag.series_ref = obj.at("entity_id").get<std::string>();
        bag.label = obj.at("label").get<int>();
        if (bag.label != 0 && bag.label != 1)
            throw ValueError(where + ": label must be 0 or 1");

        const auto& windows = obj.at("windows");
        if (!windows.is_array() || windows.empty())
            throw SchemaError(where + ": windows must be a non-empty array");
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto& win = windows[i];
            if (!win.is_array() || win.empty())
                throw SchemaError(where + ": window " + std::to_string(i) + " malformed");
            Instance inst;
            inst.bag_id = bag.series_ref;
            inst.index = i;
            inst.window = Matrix(win.size(), win[0].size());
            for (std::size_t r = 0; r < win.size(); ++r) {
                if (!win[r].is_array() || win[r].size() != inst.window.cols())
                    throw SchemaError(where + ": ragged window " + std::to_string(i));
                for (std::size_t c = 0; c < inst.window.cols(); ++c)
                    inst.window.at(r, c) = win[r][c].get<double>();
            }
            if (!inst.window.all_finite())
                throw ValueError(where + ": non-finite value in window " + std::to_string(i));
            if (m == 0) {
                m = inst.window.rows();
                w = inst.window.cols();
            } else if (inst.window.rows() != m || inst.window.cols() != w) {
                throw SchemaError(where + ": window shape differs from the rest of the file");
            }
            inst.pseudo_label = bag.label;
            bag.instances.push_back(std::move(inst));
        }
        if (obj.contains("true_instance_labels") && !obj.at("true_instance_labels").is_null()) {
            const auto& labels = obj.at("true_instance_labels");
            if (!labels.is_array() || labels.size() != bag.instances.size())
                throw SchemaError(where + ": true_instance_labels length mismatch");
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (!labels[i].is_null()) bag.instances[i].true_label = labels[i].get<int>();
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

/// Deterministic 70/30-style split keyed on a hash of the entity id alone,
/// so membership is stable across runs and dataset orderings.
inline std::pair<std::vector<Bag>, std::vector<Bag>> split_bags(const std::vector<Bag>& bags,
                                                                double train_fraction = 0.7) {
    if (train_fraction < 0.0 || train_fraction > 1.0)
        throw ConfigError("split_bags: train_fraction outside [0,1]");
    std::vector<Bag> train, test;
    for (const auto& bag : bags) {
        DetRng h(fnv1a64(bag.series_ref));
        (h.uniform() < train_fraction ? train : test).push_back(bag);
    }
    return {std::move(train), std::move(test)};
}

} // namespace uamil
