#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uamil/errors.hpp"
#include "uamil/fusion.hpp"
#include "uamil/ingest.hpp"
#include "uamil/pipeline.hpp"

namespace uamil {

namespace cli_detail {

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

inline std::set<int> parse_code_list(const std::string& text) {
    std::set<int> codes;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        try {
            codes.insert(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("bad vessel-type code '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return codes;
}

/// Labels for the fuse sweep: either a bag file (.jsonl) or a two-column
/// "entity_id,label" CSV.
inline std::map<std::string, int> load_labels(const std::filesystem::path& path) {
    std::map<std::string, int> labels;
    if (path.extension() == ".jsonl") {
        for (const auto& bag : read_bag_file(path)) labels[bag.series_ref] = bag.label;
        return labels;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "entity_id,label")
        throw SchemaError("'" + path.string() + "': expected header entity_id,label");
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("'" + path.string() + "': expected 2 fields per row");
        labels[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
    }
    return labels;
}

inline void write_fused_csv(std::ostream& out, const std::vector<FusedRecord>& fused) {
    out << "entity_id,prediction,lambda\n";
    for (const auto& r : fused)
        out << r.entity_id << ',' << shortest_double(r.prediction) << ','
            << shortest_double(r.lambda_used) << '\n';
}

} // namespace cli_detail

/// Command-line front end. Returns 0 on success, 2 on usage errors, 1 on
/// runtime failures.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Uncertainty-aware multiple-instance learning for long "
                 "multivariate time-series classification"};
    app.require_subcommand(1);

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic planted-shapelet dataset");
    std::string synth_config_path, synth_out, synth_pair_out;
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--config", synth_config_path, "Synthetic config JSON");
    synth->add_option("--out", synth_out, "Output bag file (JSON lines)")->required();
    synth->add_option("--seed", synth_seed, "Override the config seed");
    synth->add_option("--pair-out", synth_pair_out,
                      "Also emit a paired second-modality bag file here");
    synth->callback([&] {
        SyntheticConfig config;
        std::optional<ModalityPairConfig> pair;
        if (!synth_config_path.empty()) {
            const auto j = cli_detail::load_json_file(synth_config_path);
            config = synthetic_config_from_json(j);
            if (j.contains("modality_pair"))
                pair = modality_pair_config_from_json(j.at("modality_pair"));
        }
        if (synth_seed) config.seed = *synth_seed;
        const auto bags = generate_synthetic(config);
        write_bag_file(synth_out, bags);
        std::cout << "wrote " << bags.size() << " bags to " << synth_out << "\n";
        if (!synth_pair_out.empty()) {
            const ModalityPairConfig pc = pair.value_or(ModalityPairConfig{});
            const auto features =
                generate_modality_pair(bags, pc.feature_dim, pc.signal_strength, pc.noise_std,
                                       pc.seed.value_or(config.seed + 1), pc.missing_fraction);
            write_bag_file(synth_pair_out, feature_bags(features));
            std::cout << "wrote " << features.size() << " paired records to " << synth_pair_out
                      << "\n";
        }
    });

    // --- ingest --------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "Parse an AIS CSV into a labeled bag file");
    std::string ingest_data, ingest_out, ingest_task = "fishing", ingest_codes;
    std::size_t ingest_min_len = 100, ingest_window = 100;
    double ingest_reject_frac = 0.10;
    ingest->add_option("--data", ingest_data, "AIS CSV input")->required();
    ingest->add_option("--out", ingest_out, "Output bag file")->required();
    ingest->add_option("--task", ingest_task, "fishing | cargo | tanker | custom");
    ingest->add_option("--positive-codes", ingest_codes,
                       "Comma-separated vessel-type codes for the custom task");
    ingest->add_option("--min-len", ingest_min_len, "Minimum trajectory length");
    ingest->add_option("--window", ingest_window, "Window length");
    ingest->add_option("--max-reject-frac", ingest_reject_frac,
                       "Drop vessels with a higher rejected-row fraction");
    ingest->callback([&] {
        const TaskSpec task = ingest_task == "custom"
                                  ? TaskSpec::custom(cli_detail::parse_code_list(ingest_codes))
                                  : TaskSpec::named(ingest_task);
        const AisCsv csv = parse_ais_csv(ingest_data);
        const auto bags = build_bags(csv.records, task, ingest_min_len, ingest_window,
                                     &csv.rejects, ingest_reject_frac);
        write_bag_file(ingest_out, bags);
        std::cout << "parsed " << csv.records.size() << " records ("
                  << csv.rejects.rejected() << " rejected)\n";
        for (const auto& [reason, count] : csv.rejects.by_reason)
            std::cout << "  rejected " << count << ": " << reason << "\n";
        std::cout << "wrote " << bags.size() << " bags to " << ingest_out << "\n";
    });

    // --- train ---------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Train a model on a bag file");
    std::string train_data, train_config_path, train_out;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::size_t> train_epochs;
    train_cmd->add_option("--data", train_data, "Training bag file")->required();
    train_cmd->add_option("--config", train_config_path, "Train config JSON");
    train_cmd->add_option("--out", train_out, "Checkpoint output path")->required();
    train_cmd->add_option("--seed", train_seed, "Override the config seed");
    train_cmd->add_option("--epochs", train_epochs, "Override the epoch count");
    train_cmd->callback([&] {
        TrainConfig config;
        if (!train_config_path.empty())
            config = config_from_json(cli_detail::load_json_file(train_config_path));
        if (train_seed) config.seed = *train_seed;
        if (train_epochs) config.epochs = *train_epochs;
        const auto bags = read_bag_file(train_data);
        Trainer trainer(config, bags);
        while (trainer.epoch() < trainer.config().epochs) {
            trainer.run_epoch();
            std::cout << "epoch " << trainer.epoch() << "/" << trainer.config().epochs
                      << " mean_loss=" << trainer.loss_history().back() << "\n";
        }
        save_checkpoint(trainer.checkpoint(), train_out);
        std::cout << "wrote checkpoint to " << train_out << "\n";
    });

    // --- eval ----------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a bag file");
    std::string eval_model, eval_data, eval_report;
    eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "Bag file")->required();
    eval_cmd->add_option("--report", eval_report, "Report JSON output path")->required();
    eval_cmd->callback([&] {
        const Checkpoint ckpt = load_checkpoint(eval_model);
        const auto bags = read_bag_file(eval_data);
        const EvalReport report = evaluate(ckpt, bags);
        write_report(report, eval_report);
        std::cout << "bags=" << report.n_bags << " f_score=" << report.f_score
                  << " auc_roc=" << report.auc_roc << " ap=" << report.average_precision;
        if (report.instance_auc) std::cout << " instance_auc=" << *report.instance_auc;
        std::cout << "\nwrote report to " << eval_report << "\n";
    });

    // --- predict -------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "Emit per-bag modality records");
    std::string predict_model, predict_data, predict_out;
    predict_cmd->add_option("--model", predict_model, "Checkpoint path")->required();
    predict_cmd->add_option("--data", predict_data, "Bag file")->required();
    predict_cmd->add_option("--out", predict_out, "Modality record CSV output")->required();
    predict_cmd->callback([&] {
        const Checkpoint ckpt = load_checkpoint(predict_model);
        const auto bags = read_bag_file(predict_data);
        const auto evals = predict_bags(ckpt, bags);
        std::vector<ModalityRecord> records;
        records.reserve(evals.size());
        for (const auto& e : evals)
            records.emplace_back(e.bag.entity_id, e.bag.prediction, e.bag.confidence,
                                 Modality::A);
        write_modality_csv(predict_out, records);
        std::cout << "wrote " << records.size() << " records to " << predict_out << "\n";
    });

    // --- fuse ----------------------------------------------------------
    auto* fuse_cmd = app.add_subcommand("fuse", "Fuse two modality record files");
    std::string fuse_a, fuse_b, fuse_mode = "adaptive", fuse_out, fuse_labels;
    bool fuse_sweep = false;
    fuse_cmd->add_option("--a", fuse_a, "Modality A record CSV")->required();
    fuse_cmd->add_option("--b", fuse_b, "Modality B record CSV")->required();
    fuse_cmd->add_option("--mode", fuse_mode, "adaptive | fixed:<lambda>");
    fuse_cmd->add_option("--out", fuse_out, "Fused prediction CSV output");
    fuse_cmd->add_flag("--sweep", fuse_sweep,
                       "Print the fixed-lambda recall grid (requires --labels)");
    fuse_cmd->add_option("--labels", fuse_labels, "Labels for the sweep (bag file or CSV)");
    fuse_cmd->callback([&] {
        FusionMode mode = FusionMode::make_adaptive();
        if (fuse_mode != "adaptive") {
            const std::string prefix = "fixed:";
            if (fuse_mode.rfind(prefix, 0) != 0)
                throw CLI::ValidationError("--mode", "expected adaptive or fixed:<lambda>");
            double lambda = 0.0;
            try {
                lambda = std::stod(fuse_mode.substr(prefix.size()));
            } catch (const std::exception&) {
                throw CLI::ValidationError("--mode", "bad lambda in '" + fuse_mode + "'");
            }
            if (!(lambda >= 0.0 && lambda <= 1.0))
                throw CLI::ValidationError("--mode", "lambda must lie in [0,1]");
            mode = FusionMode::fixed(lambda);
        }
        if (fuse_sweep && fuse_labels.empty())
            throw CLI::ValidationError("--sweep", "requires --labels");

        const auto records_a = read_modality_csv(fuse_a, Modality::A);
        const auto records_b = read_modality_csv(fuse_b, Modality::B);
        const auto fused = fuse_dataset(records_a, records_b, mode);
        if (!fuse_out.empty()) {
            std::ofstream out(fuse_out, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot open '" + fuse_out + "' for writing");
            cli_detail::write_fused_csv(out, fused);
            if (!out) throw IoError("failed while writing '" + fuse_out + "'");
            std::cout << "wrote " << fused.size() << " fused predictions to " << fuse_out << "\n";
        } else if (!fuse_sweep) {
            cli_detail::write_fused_csv(std::cout, fused);
        }
        if (fuse_sweep) {
            const auto labels = cli_detail::load_labels(fuse_labels);
            const auto [a_matched, b_matched] = matched_pairs(records_a, records_b);
            std::cout << "lambda,recall\n";
            for (int i = 0; i <= 10; ++i) {
                const double lambda = static_cast<double>(i) / 10.0;
                const auto grid =
                    fuse_dataset(a_matched, b_matched, FusionMode::fixed(lambda));
                std::cout << lambda << ',' << fusion_recall(grid, labels) << "\n";
            }
            const auto adaptive =
                fuse_dataset(a_matched, b_matched, FusionMode::make_adaptive());
            std::cout << "adaptive," << fusion_recall(adaptive, labels) << "\n";
        }
    });

    // --- calib ---------------------------------------------------------
    auto* calib_cmd = app.add_subcommand("calib", "Print the calibration table of a report");
    std::string calib_report;
    calib_cmd->add_option("--report", calib_report, "Report JSON path")->required();
    calib_cmd->callback([&] {
        const EvalReport report = read_report(calib_report);
        std::cout << "threshold,accuracy,coverage\n";
        for (const auto& row : report.calibration) {
            std::cout << row.threshold << ',';
            if (row.accuracy) std::cout << *row.accuracy;
            std::cout << ',' << row.coverage << "\n";
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}

} // namespace uamil
