#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uamil/errors.hpp"

namespace uamil {

// Uncertainty-aware late fusion: each modality model reports a per-entity
// bag prediction and confidence; the fused prediction is the confidence-
// weighted convex combination of the two.

enum class Modality { A, B };

struct ModalityRecord {
    std::string entity_id;
    double prediction = 0.0; // in [0, 1]
    double confidence = 0.0; // in (0, 1]
    Modality tag = Modality::A;

    ModalityRecord(std::string id, double pred, double conf, Modality mod)
        : entity_id(std::move(id)), prediction(pred), confidence(conf), tag(mod) {
        if (!(prediction >= 0.0 && prediction <= 1.0))
            throw ValueError("modality record '" + entity_id + "': prediction outside [0,1]");
        if (!(confidence > 0.0 && confidence <= 1.0))
            throw ValueError("modality record '" + entity_id +
                             "': confidence must be in (0,1]");
    }
};

inline constexpr double kConfidenceFloor = 1e-6;

/// Confidence-adaptive weight for modality A: c_a / (c_a + c_b). Both
/// confidences are floored so the ratio is always defined.
inline double adaptive_lambda(double c_a, double c_b) {
    if (c_a <= 0.0 && c_b <= 0.0)
        throw ValueError("adaptive_lambda: both confidences are zero");
    const double fa = std::max(c_a, kConfidenceFloor);
    const double fb = std::max(c_b, kConfidenceFloor);
    return fa / (fa + fb);
}

/// Weighted sum of the two modality predictions for one entity.
inline double fuse(const ModalityRecord& rec_a, const ModalityRecord& rec_b, double lambda) {
    if (rec_a.entity_id != rec_b.entity_id)
        throw DataError("fuse: entity mismatch '" + rec_a.entity_id + "' vs '" +
                        rec_b.entity_id + "'");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ValueError("fuse: lambda outside [0,1]");
    return lambda * rec_a.prediction + (1.0 - lambda) * rec_b.prediction;
}

struct FusionMode {
    bool adaptive = true;
    double fixed_lambda = 0.5;

    static FusionMode make_adaptive() { return {true, 0.5}; }
    static FusionMode fixed(double lambda) {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw ValueError("fusion: fixed lambda outside [0,1]");
        return {false, lambda};
    }
};

struct FusedRecord {
    std::string entity_id;
    double prediction = 0.0;
    double lambda_used = 0.0;
};

/// Inner-joins the two record sets on entity id and fuses each pair;
/// entities present in only one modality fall back to that modality's
/// prediction (lambda recorded as 1 or 0). Output is sorted by entity id.
inline std::vector<FusedRecord> fuse_dataset(const std::vector<ModalityRecord>& records_a,
                                             const std::vector<ModalityRecord>& records_b,
                                             const FusionMode& mode) {
    auto index = [](const std::vector<ModalityRecord>& records, const char* which) {
        std::map<std::string, const ModalityRecord*> by_id;
        for (const auto& r : records)
            if (!by_id.emplace(r.entity_id, &r).second)
                throw DataError(std::string("fuse_dataset: duplicate entity '") + r.entity_id +
                                "' in modality " + which);
        return by_id;
    };
    const auto a_by_id = index(records_a, "A");
    const auto b_by_id = index(records_b, "B");

    std::vector<FusedRecord> out;
    for (const auto& [id, ra] : a_by_id) {
        const auto itb = b_by_id.find(id);
        if (itb == b_by_id.end()) {
            out.push_back({id, ra->prediction, 1.0});
            continue;
        }
        const double lambda = mode.adaptive
                                  ? adaptive_lambda(ra->confidence, itb->second->confidence)
                                  : mode.fixed_lambda;
        out.push_back({id, fuse(*ra, *itb->second, lambda), lambda});
    }
    for (const auto& [id, rb] : b_by_id)
        if (!a_by_id.contains(id)) out.push_back({id, rb->prediction, 0.0});
    std::sort(out.begin(), out.end(),
              [](const FusedRecord& x, const FusedRecord& y) { return x.entity_id < y.entity_id; });
    return out;
}

/// Restricts both modality lists to entities present in each, the population
/// on which fusion comparisons are meaningful.
inline std::pair<std::vector<ModalityRecord>, std::vector<ModalityRecord>> matched_pairs(
    const std::vector<ModalityRecord>& records_a, const std::vector<ModalityRecord>& records_b) {
    std::map<std::string, std::size_t> b_ids;
    for (std::size_t i = 0; i < records_b.size(); ++i) b_ids.emplace(records_b[i].entity_id, i);
    std::vector<ModalityRecord> a_out, b_out;
    for (const auto& ra : records_a) {
        const auto it = b_ids.find(ra.entity_id);
        if (it == b_ids.end()) continue;
        a_out.push_back(ra);
        b_out.push_back(records_b[it->second]);
    }
    return {std::move(a_out), std::move(b_out)};
}

/// Recall of fused predictions at a decision threshold, over the entities
/// that carry a label.
inline double fusion_recall(const std::vector<FusedRecord>& fused,
                            const std::map<std::string, int>& labels, double threshold = 0.5) {
    std::size_t tp = 0, fn = 0;
    for (const auto& rec : fused) {
        const auto it = labels.find(rec.entity_id);
        if (it == labels.end() || it->second != 1) continue;
        (rec.prediction >= threshold ? tp : fn)++;
    }
    if (tp + fn == 0) throw DataError("fusion_recall: no labeled positives");
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

// ---------------------------------------------------------------------------
// Modality record CSV: the exchange format between trained models and the
// fuse command. Header is exactly "entity_id,prediction,confidence".

/// Shortest decimal that round-trips the exact double, as in the JSON files.
inline std::string shortest_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, ptr};
}

inline void write_modality_csv(const std::filesystem::path& path,
                               const std::vector<ModalityRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "entity_id,prediction,confidence\n";
    for (const auto& r : records)
        out << r.entity_id << ',' << shortest_double(r.prediction) << ','
            << shortest_double(r.confidence) << '\n';
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline std::vector<ModalityRecord> read_modality_csv(const std::filesystem::path& path,
                                                     Modality tag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "entity_id,prediction,confidence")
        throw SchemaError("'" + path.string() + "': unexpected header '" + line + "'");

    std::vector<ModalityRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw ParseError("'" + path.string() + "' line " + std::to_string(line_no) +
                             ": expected 3 fields");
        auto parse_double = [&](const std::string& text) {
            double v = 0.0;
            const char* first = text.data();
            const char* last = text.data() + text.size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last || !std::isfinite(v))
                throw ParseError("'" + path.string() + "' line " + std::to_string(line_no) +
                                 ": bad number '" + text + "'");
            return v;
        };
        records.emplace_back(line.substr(0, c1),
                             parse_double(line.substr(c1 + 1, c2 - c1 - 1)),
                             parse_double(line.substr(c2 + 1)), tag);
    }
    return records;
}

} // namespace uamil
