#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uamil/bayes_head.hpp"
#include "uamil/encoder.hpp"
#include "uamil/errors.hpp"
#include "uamil/ingest.hpp"
#include "uamil/metrics.hpp"
#include "uamil/mil.hpp"
#include "uamil/optimizer.hpp"
#include "uamil/rng.hpp"
#include "uamil/series.hpp"

namespace uamil {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
    TaskSpec task{"custom", {1}};
    std::size_t window_len = 100;
    std::size_t n_neg = 200;
    std::size_t n_pos = 400;
    std::size_t epochs = 40;
    std::size_t steps_per_epoch = 0; // 0: ceil(instances / batch)
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double k = 2.0;
    int j_train = 10;
    int j_eval = 30;
    double prior_sigma = 1.0;
    std::size_t top_k = 0; // 0: ceil(N/10) per bag
    std::uint64_t seed = 0;
    MedianScope median_scope = MedianScope::positives;
    bool attention = true;
    std::size_t feature_dim = 64;

    void validate() const {
        if (epochs == 0) throw ConfigError("config: epochs must be positive");
        if (n_neg + n_pos == 0) throw ConfigError("config: empty batch");
        if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
        if (!(prior_sigma > 0.0)) throw ConfigError("config: prior_sigma must be positive");
        if (!(k > 0.0)) throw ConfigError("config: k must be positive");
        if (j_train < 2 || j_eval < 2)
            throw ConfigError("config: Monte-Carlo sample counts must be >= 2");
        if (window_len < 2) throw ConfigError("config: window_len must be >= 2");
        if (feature_dim == 0) throw ConfigError("config: feature_dim must be positive");
        if (task.positive_type_codes.empty())
            throw ConfigError("config: task needs positive type codes");
    }
};

inline nlohmann::ordered_json config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["task"] = {{"name", c.task.name},
                 {"positive_type_codes",
                  std::vector<int>(c.task.positive_type_codes.begin(),
                                   c.task.positive_type_codes.end())}};
    j["window_len"] = c.window_len;
    j["n_neg"] = c.n_neg;
    j["n_pos"] = c.n_pos;
    j["epochs"] = c.epochs;
    j["steps_per_epoch"] = c.steps_per_epoch;
    j["learning_rate"] = c.learning_rate;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    j["k"] = c.k;
    j["j_train"] = c.j_train;
    j["j_eval"] = c.j_eval;
    j["prior_sigma"] = c.prior_sigma;
    j["top_k"] = c.top_k;
    j["seed"] = c.seed;
    j["median_scope"] = c.median_scope == MedianScope::positives ? "positives" : "all";
    j["attention"] = c.attention;
    j["feature_dim"] = c.feature_dim;
    return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    static const std::set<std::string> known = {
        "task",        "window_len", "n_neg",      "n_pos",       "epochs",
        "steps_per_epoch", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
        "k",           "j_train",    "j_eval",     "prior_sigma", "top_k",
        "seed",        "median_scope", "attention", "feature_dim"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw ConfigError("config: unknown field '" + key + "'");

    if (j.contains("task")) {
        const auto& t = j.at("task");
        std::string name = t.value("name", std::string("custom"));
        if (t.contains("positive_type_codes")) {
            std::set<int> codes;
            for (const auto& code : t.at("positive_type_codes")) codes.insert(code.get<int>());
            if (codes.empty()) throw ConfigError("config: positive_type_codes empty");
            c.task = TaskSpec{name, codes};
        } else {
            c.task = TaskSpec::named(name);
        }
    }
    c.window_len = j.value("window_len", c.window_len);
    c.n_neg = j.value("n_neg", c.n_neg);
    c.n_pos = j.value("n_pos", c.n_pos);
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.k = j.value("k", c.k);
    c.j_train = j.value("j_train", c.j_train);
    c.j_eval = j.value("j_eval", c.j_eval);
    c.prior_sigma = j.value("prior_sigma", c.prior_sigma);
    c.top_k = j.value("top_k", c.top_k);
    c.seed = j.value("seed", c.seed);
    if (j.contains("median_scope")) {
        const std::string scope = j.at("median_scope").get<std::string>();
        if (scope == "positives") c.median_scope = MedianScope::positives;
        else if (scope == "all") c.median_scope = MedianScope::all;
        else throw ConfigError("config: median_scope must be 'positives' or 'all'");
    }
    c.attention = j.value("attention", c.attention);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    int format_version = kCheckpointVersion;
    TrainConfig config;
    Normalizer normalizer;
    EncoderParams encoder{1, 1};
    VariationalHead head;
    std::uint64_t rng_state = 0;
    std::size_t epoch = 0;
    std::vector<double> loss_history; // per-epoch mean training loss
};

namespace detail {

inline nlohmann::ordered_json span_json(std::span<const double> s) {
    return nlohmann::ordered_json(std::vector<double>(s.begin(), s.end()));
}

inline void fill_span(std::span<double> dst, const nlohmann::json& src, const char* name) {
    if (!src.is_array() || src.size() != dst.size())
        throw ShapeError(std::string("checkpoint: field '") + name + "' has wrong length");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i].get<double>();
}

} // namespace detail

inline nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
    nlohmann::ordered_json j;
    j["format_version"] = ckpt.format_version;
    j["config"] = config_to_json(ckpt.config);
    j["normalizer"] = {{"channel_names", ckpt.normalizer.channel_names()},
                       {"means", ckpt.normalizer.means()},
                       {"stds", ckpt.normalizer.stds()}};
    nlohmann::ordered_json enc;
    enc["in_channels"] = ckpt.encoder.in_channels();
    enc["feature_dim"] = ckpt.encoder.feature_dim();
    enc["conv1_w"] = detail::span_json(ckpt.encoder.conv1_w());
    enc["conv1_b"] = detail::span_json(ckpt.encoder.conv1_b());
    enc["conv2_w"] = detail::span_json(ckpt.encoder.conv2_w());
    enc["conv2_b"] = detail::span_json(ckpt.encoder.conv2_b());
    enc["gru_wz"] = detail::span_json(ckpt.encoder.gru_wz());
    enc["gru_wr"] = detail::span_json(ckpt.encoder.gru_wr());
    enc["gru_wn"] = detail::span_json(ckpt.encoder.gru_wn());
    enc["gru_uz"] = detail::span_json(ckpt.encoder.gru_uz());
    enc["gru_ur"] = detail::span_json(ckpt.encoder.gru_ur());
    enc["gru_un"] = detail::span_json(ckpt.encoder.gru_un());
    enc["gru_bz"] = detail::span_json(ckpt.encoder.gru_bz());
    enc["gru_br"] = detail::span_json(ckpt.encoder.gru_br());
    enc["gru_bn"] = detail::span_json(ckpt.encoder.gru_bn());
    enc["proj_w"] = detail::span_json(ckpt.encoder.proj_w());
    enc["proj_b"] = detail::span_json(ckpt.encoder.proj_b());
    j["encoder"] = std::move(enc);
    j["head"] = {{"in_dim", ckpt.head.in_dim},
                 {"hidden", ckpt.head.hidden},
                 {"mu", ckpt.head.mu},
                 {"rho", ckpt.head.rho}};
    j["rng_state"] = ckpt.rng_state;
    j["epoch"] = ckpt.epoch;
    j["loss_history"] = ckpt.loss_history;
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("format_version"))
        throw ParseError("checkpoint: missing format_version");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint: unsupported format version " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.format_version = version;
    ckpt.config = config_from_json(j.at("config"));

    const auto& n = j.at("normalizer");
    ckpt.normalizer = Normalizer(n.at("channel_names").get<std::vector<std::string>>(),
                                 n.at("means").get<std::vector<double>>(),
                                 n.at("stds").get<std::vector<double>>());

    const auto& e = j.at("encoder");
    ckpt.encoder = EncoderParams(e.at("in_channels").get<std::size_t>(),
                                 e.at("feature_dim").get<std::size_t>());
    detail::fill_span(ckpt.encoder.conv1_w(), e.at("conv1_w"), "conv1_w");
    detail::fill_span(ckpt.encoder.conv1_b(), e.at("conv1_b"), "conv1_b");
    detail::fill_span(ckpt.encoder.conv2_w(), e.at("conv2_w"), "conv2_w");
    detail::fill_span(ckpt.encoder.conv2_b(), e.at("conv2_b"), "conv2_b");
    detail::fill_span(ckpt.encoder.gru_wz(), e.at("gru_wz"), "gru_wz");
    detail::fill_span(ckpt.encoder.gru_wr(), e.at("gru_wr"), "gru_wr");
    detail::fill_span(ckpt.encoder.gru_wn(), e.at("gru_wn"), "gru_wn");
    detail::fill_span(ckpt.encoder.gru_uz(), e.at("gru_uz"), "gru_uz");
    detail::fill_span(ckpt.encoder.gru_ur(), e.at("gru_ur"), "gru_ur");
    detail::fill_span(ckpt.encoder.gru_un(), e.at("gru_un"), "gru_un");
    detail::fill_span(ckpt.encoder.gru_bz(), e.at("gru_bz"), "gru_bz");
    detail::fill_span(ckpt.encoder.gru_br(), e.at("gru_br"), "gru_br");
    detail::fill_span(ckpt.encoder.gru_bn(), e.at("gru_bn"), "gru_bn");
    detail::fill_span(ckpt.encoder.proj_w(), e.at("proj_w"), "proj_w");
    detail::fill_span(ckpt.encoder.proj_b(), e.at("proj_b"), "proj_b");

    const auto& h = j.at("head");
    ckpt.head = VariationalHead(h.at("in_dim").get<std::size_t>(),
                                h.at("hidden").get<std::size_t>());
    ckpt.head.mu = h.at("mu").get<std::vector<double>>();
    ckpt.head.rho = h.at("rho").get<std::vector<double>>();
    if (ckpt.head.mu.size() != ckpt.head.weight_count() ||
        ckpt.head.rho.size() != ckpt.head.weight_count())
        throw ShapeError("checkpoint: head parameter length mismatch");
    ckpt.head.prior_sigma = ckpt.config.prior_sigma;
    ckpt.head.k = ckpt.config.k;
    ckpt.head.j_train = ckpt.config.j_train;
    ckpt.head.j_eval = ckpt.config.j_eval;

    ckpt.rng_state = j.at("rng_state").get<std::uint64_t>();
    ckpt.epoch = j.at("epoch").get<std::size_t>();
    ckpt.loss_history = j.at("loss_history").get<std::vector<double>>();
    return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << checkpoint_to_json(ckpt).dump(1) << '\n';
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------
// Training

class Trainer {
public:
    Trainer(TrainConfig config, const std::vector<Bag>& bags)
        : config_(std::move(config)), rng_(config_.seed) {
        config_.validate();
        if (bags.empty()) throw DataError("train: no bags");
        bool has_pos = false, has_neg = false;
        for (const auto& bag : bags) (bag.label == 1 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) throw DataError("train: need bags of both classes");

        const Matrix& first = bags.front().instances.front().window;
        const std::size_t m = first.rows();
        const std::size_t w = first.cols();
        // Bag files carry pre-segmented windows; their width is authoritative.
        config_.window_len = w;

        std::vector<const Matrix*> windows;
        total_instances_ = 0;
        for (const auto& bag : bags)
            for (const auto& inst : bag.instances) {
                if (inst.window.rows() != m || inst.window.cols() != w)
                    throw ShapeError("train: inconsistent window shapes across bags");
                windows.push_back(&inst.window);
                ++total_instances_;
            }
        normalizer_ = fit_normalizer_windows(windows);

        bags_ = bags;
        for (auto& bag : bags_)
            for (auto& inst : bag.instances) normalizer_.apply_rows(inst.window);

        encoder_ = EncoderParams(m, config_.feature_dim);
        encoder_.init_uniform(rng_);
        head_ = VariationalHead(config_.feature_dim);
        head_.prior_sigma = config_.prior_sigma;
        head_.k = config_.k;
        head_.j_train = config_.j_train;
        head_.j_eval = config_.j_eval;
        head_.init(rng_);

        const std::size_t batch = config_.n_neg + config_.n_pos;
        steps_per_epoch_ = config_.steps_per_epoch != 0
                               ? config_.steps_per_epoch
                               : (total_instances_ + batch - 1) / batch;

        opt_encoder_.emplace(encoder_.size(), config_.learning_rate, config_.adam_beta1,
                             config_.adam_beta2, config_.adam_eps);
        opt_mu_.emplace(head_.weight_count(), config_.learning_rate, config_.adam_beta1,
                        config_.adam_beta2, config_.adam_eps);
        opt_rho_.emplace(head_.weight_count(), config_.learning_rate, config_.adam_beta1,
                         config_.adam_beta2, config_.adam_eps);
    }

    /// One optimizer update: sample a balanced batch, encode, score with
    /// fresh Monte-Carlo predictions, assign attention, and descend the
    /// attention-weighted variational loss.
    double step() {
        const auto batch = sample_batch(bags_, rng_, config_.n_neg, config_.n_pos);
        const std::size_t b = batch.size();

        std::vector<std::vector<double>> features(b);
        std::vector<int> labels(b);
        for (std::size_t i = 0; i < b; ++i) {
            const Instance& inst = bags_[batch[i].bag].instances[batch[i].instance];
            features[i] = encode(inst.window, encoder_);
            labels[i] = inst.pseudo_label;
        }

        std::vector<double> attention(b, 1.0);
        if (config_.attention) {
            std::vector<double> predictions(b), confidences(b);
            for (std::size_t i = 0; i < b; ++i) {
                const auto pred = predict_mc(features[i], head_, config_.j_train, rng_);
                predictions[i] = pred.mean;
                confidences[i] = pred.confidence;
            }
            attention = assign_attention(predictions, confidences, labels,
                                         config_.median_scope)
                            .attention;
        }

        const ElboResult elbo = elbo_loss_weighted(features, labels, attention, head_,
                                                   config_.j_train, rng_, total_instances_);

        EncoderParams encoder_grads(encoder_.in_channels(), config_.feature_dim);
        Matrix input_grad_sink(encoder_.in_channels(), config_.window_len);
        for (std::size_t i = 0; i < b; ++i) {
            bool nonzero = false;
            for (double g : elbo.grad_features[i])
                if (g != 0.0) { nonzero = true; break; }
            if (!nonzero) continue;
            const Instance& inst = bags_[batch[i].bag].instances[batch[i].instance];
            encode_backward_accumulate(inst.window, encoder_, elbo.grad_features[i],
                                       encoder_grads, input_grad_sink);
        }

        opt_encoder_->update(encoder_.raw(), encoder_grads.raw());
        opt_mu_->update(head_.mu, elbo.grad_mu);
        opt_rho_->update(head_.rho, elbo.grad_rho);

        ++step_count_;
        if (!std::isfinite(elbo.loss))
            throw ValueError("train: non-finite loss at step " + std::to_string(step_count_));
        if (!encoder_.all_finite() || !head_.all_finite())
            throw ValueError("train: non-finite parameter after step " +
                             std::to_string(step_count_));
        epoch_losses_.push_back(elbo.loss);
        return elbo.loss;
    }

    void run_epoch() {
        epoch_losses_.clear();
        for (std::size_t s = 0; s < steps_per_epoch_; ++s) step();
        double mean = 0.0;
        for (double l : epoch_losses_) mean += l;
        loss_history_.push_back(mean / static_cast<double>(epoch_losses_.size()));
        ++epoch_;
    }

    Checkpoint run() {
        while (epoch_ < config_.epochs) run_epoch();
        return checkpoint();
    }

    Checkpoint checkpoint() const {
        Checkpoint ckpt;
        ckpt.config = config_;
        ckpt.normalizer = normalizer_;
        ckpt.encoder = encoder_;
        ckpt.head = head_;
        ckpt.rng_state = rng_.state();
        ckpt.epoch = epoch_;
        ckpt.loss_history = loss_history_;
        return ckpt;
    }

    std::size_t epoch() const { return epoch_; }
    std::size_t steps_per_epoch() const { return steps_per_epoch_; }
    const std::vector<double>& loss_history() const { return loss_history_; }
    const TrainConfig& config() const { return config_; }

private:
    TrainConfig config_;
    std::vector<Bag> bags_; // normalized copies
    Normalizer normalizer_;
    EncoderParams encoder_{1, 1};
    VariationalHead head_;
    DetRng rng_;
    std::optional<AdamOptimizer> opt_encoder_, opt_mu_, opt_rho_;
    std::size_t total_instances_ = 0;
    std::size_t steps_per_epoch_ = 0;
    std::size_t epoch_ = 0;
    std::size_t step_count_ = 0;
    std::vector<double> epoch_losses_;
    std::vector<double> loss_history_;
};

inline Checkpoint train(const TrainConfig& config, const std::vector<Bag>& bags) {
    Trainer trainer(config, bags);
    return trainer.run();
}

// ---------------------------------------------------------------------------
// Evaluation

/// Forward pass over bags with the stored normalizer and J_eval Monte-Carlo
/// samples per instance. Each bag draws from its own (seed, entity_id)
/// stream, so results do not depend on evaluation order or scheduling.
struct BagEvaluation {
    BagPrediction bag;
    std::vector<InstancePrediction> instances;
};

inline std::vector<BagEvaluation> predict_bags(const Checkpoint& ckpt,
                                               const std::vector<Bag>& bags) {
    std::vector<BagEvaluation> out;
    out.reserve(bags.size());
    for (const auto& bag : bags) {
        if (bag.instances.empty()) throw DataError("evaluate: empty bag '" + bag.series_ref + "'");
        DetRng stream = derive_stream(ckpt.config.seed, bag.series_ref);
        BagEvaluation eval;
        eval.instances.reserve(bag.instances.size());
        for (const auto& inst : bag.instances) {
            Matrix window = inst.window;
            ckpt.normalizer.apply_rows(window); // throws SchemaError on channel mismatch
            const FeatureVector feature = encode(window, ckpt.encoder);
            eval.instances.push_back(
                predict_mc(feature, ckpt.head, ckpt.config.j_eval, stream));
        }
        const std::size_t k = ckpt.config.top_k != 0 ? ckpt.config.top_k
                                                     : default_top_k(eval.instances.size());
        eval.bag = aggregate_bag(eval.instances, k);
        eval.bag.entity_id = bag.series_ref;
        out.push_back(std::move(eval));
    }
    return out;
}

struct EvalReport {
    std::string task;
    std::size_t n_bags = 0;
    double f_score = 0.0;
    double auc_roc = 0.0;
    double average_precision = 0.0;
    std::vector<CalibrationRow> calibration;
    std::optional<double> instance_auc; // only when true instance labels exist
};

inline EvalReport evaluate(const Checkpoint& ckpt, const std::vector<Bag>& bags) {
    const auto evals = predict_bags(ckpt, bags);

    ScoredSet bag_set;
    for (std::size_t i = 0; i < bags.size(); ++i) {
        bag_set.scores.push_back(evals[i].bag.prediction);
        bag_set.labels.push_back(bags[i].label);
        bag_set.confidences.push_back(evals[i].bag.confidence);
    }

    EvalReport report;
    report.task = ckpt.config.task.name;
    report.n_bags = bags.size();
    report.f_score = f_score(bag_set);
    report.auc_roc = auc_roc(bag_set);
    report.average_precision = average_precision(bag_set);
    report.calibration = calibration_curve(bag_set);

    ScoredSet instance_set;
    for (std::size_t i = 0; i < bags.size(); ++i)
        for (std::size_t n = 0; n < bags[i].instances.size(); ++n)
            if (bags[i].instances[n].true_label) {
                instance_set.scores.push_back(evals[i].instances[n].mean);
                instance_set.labels.push_back(*bags[i].instances[n].true_label);
            }
    if (!instance_set.scores.empty()) {
        bool has_pos = false, has_neg = false;
        for (int label : instance_set.labels) (label == 1 ? has_pos : has_neg) = true;
        if (has_pos && has_neg) report.instance_auc = auc_roc(instance_set);
    }
    return report;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["task"] = report.task;
    j["n_bags"] = report.n_bags;
    j["f_score"] = report.f_score;
    j["auc_roc"] = report.auc_roc;
    j["average_precision"] = report.average_precision;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : report.calibration) {
        nlohmann::ordered_json r;
        r["threshold"] = row.threshold;
        r["accuracy"] = row.accuracy ? nlohmann::ordered_json(*row.accuracy)
                                     : nlohmann::ordered_json(nullptr);
        r["coverage"] = row.coverage;
        rows.push_back(std::move(r));
    }
    j["calibration"] = std::move(rows);
    if (report.instance_auc) j["instance_auc"] = *report.instance_auc;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    report.task = j.at("task").get<std::string>();
    report.n_bags = j.at("n_bags").get<std::size_t>();
    report.f_score = j.at("f_score").get<double>();
    report.auc_roc = j.at("auc_roc").get<double>();
    report.average_precision = j.at("average_precision").get<double>();
    for (const auto& r : j.at("calibration")) {
        CalibrationRow row;
        row.threshold = r.at("threshold").get<double>();
        if (!r.at("accuracy").is_null()) row.accuracy = r.at("accuracy").get<double>();
        row.coverage = r.at("coverage").get<double>();
        report.calibration.push_back(row);
    }
    if (j.contains("instance_auc")) report.instance_auc = j.at("instance_auc").get<double>();
    return report;
}

inline void write_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << report_to_json(report).dump(1) << '\n';
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

inline EvalReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
    return report_from_json(j);
}

} // namespace uamil
