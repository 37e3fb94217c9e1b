#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "uamil/cli.hpp"

namespace fs = std::filesystem;

namespace {

/// Runs the CLI in-process with stdout/stderr captured.
struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"uamil"};
    for (const auto& a : args) argv.push_back(a.c_str());

    std::ostringstream captured_out, captured_err;
    auto* old_out = std::cout.rdbuf(captured_out.rdbuf());
    auto* old_err = std::cerr.rdbuf(captured_err.rdbuf());
    const int code = uamil::run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return {code, captured_out.str(), captured_err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("uamil_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
}

const char* kTinySynthConfig = R"({
  "n_pos_bags": 6, "n_neg_bags": 6,
  "series_len_min": 16, "series_len_max": 24,
  "window_len": 8, "shapelet_len": 8,
  "seed": 0,
  "modality_pair": {"feature_dim": 16, "signal_strength": 2.0, "noise_std": 1.0}
})";

const char* kTinyTrainConfig = R"({
  "epochs": 1, "steps_per_epoch": 2, "n_neg": 8, "n_pos": 8,
  "feature_dim": 8, "j_train": 2, "j_eval": 2, "seed": 0
})";

} // namespace

TEST_CASE("no arguments prints usage and exits 2") {
    const CliResult res = run({});
    CHECK(res.exit_code == 2);
    CHECK(res.err.find("Usage") != std::string::npos);
}

TEST_CASE("unknown flags exit 2 with usage on stderr") {
    const CliResult res = run({"synth", "--out", "x.jsonl", "--bogus"});
    CHECK(res.exit_code == 2);
    CHECK_FALSE(res.err.empty());
}

TEST_CASE("fuse rejects lambda outside [0,1]") {
    const CliResult res = run({"fuse", "--a", "a.csv", "--b", "b.csv", "--mode", "fixed:1.5"});
    CHECK(res.exit_code == 2);
}

TEST_CASE("missing input files exit 1") {
    const CliResult res = run({"eval", "--model", "/nonexistent/m.json", "--data",
                               "/nonexistent/d.jsonl", "--report", "/tmp/r.json"});
    CHECK(res.exit_code == 1);
    CHECK(res.err.find("error") != std::string::npos);
}

TEST_CASE("synth, train, eval, predict, fuse, calib complete end to end") {
    TempDir dir;
    write_file(dir.file("synth.json"), kTinySynthConfig);
    write_file(dir.file("train.json"), kTinyTrainConfig);

    CHECK(run({"synth", "--config", dir.file("synth.json"), "--out", dir.file("bags.jsonl"),
               "--pair-out", dir.file("pair.jsonl")})
              .exit_code == 0);
    REQUIRE(fs::exists(dir.file("bags.jsonl")));
    REQUIRE(fs::exists(dir.file("pair.jsonl")));

    CHECK(run({"train", "--data", dir.file("bags.jsonl"), "--config", dir.file("train.json"),
               "--out", dir.file("model.json")})
              .exit_code == 0);
    REQUIRE(fs::exists(dir.file("model.json")));

    CHECK(run({"eval", "--model", dir.file("model.json"), "--data", dir.file("bags.jsonl"),
               "--report", dir.file("report.json")})
              .exit_code == 0);
    REQUIRE(fs::exists(dir.file("report.json")));

    CHECK(run({"predict", "--model", dir.file("model.json"), "--data", dir.file("bags.jsonl"),
               "--out", dir.file("pred_a.csv")})
              .exit_code == 0);

    // Train the second modality through the same pipeline and predict.
    CHECK(run({"train", "--data", dir.file("pair.jsonl"), "--config", dir.file("train.json"),
               "--out", dir.file("model_b.json")})
              .exit_code == 0);
    CHECK(run({"predict", "--model", dir.file("model_b.json"), "--data", dir.file("pair.jsonl"),
               "--out", dir.file("pred_b.csv")})
              .exit_code == 0);

    CHECK(run({"fuse", "--a", dir.file("pred_a.csv"), "--b", dir.file("pred_b.csv"), "--mode",
               "adaptive", "--out", dir.file("fused.csv")})
              .exit_code == 0);
    REQUIRE(fs::exists(dir.file("fused.csv")));

    const CliResult sweep =
        run({"fuse", "--a", dir.file("pred_a.csv"), "--b", dir.file("pred_b.csv"), "--sweep",
             "--labels", dir.file("bags.jsonl")});
    CHECK(sweep.exit_code == 0);
    CHECK(sweep.out.find("lambda,recall") != std::string::npos);
    CHECK(sweep.out.find("adaptive,") != std::string::npos);

    const CliResult sweep_no_labels =
        run({"fuse", "--a", dir.file("pred_a.csv"), "--b", dir.file("pred_b.csv"), "--sweep"});
    CHECK(sweep_no_labels.exit_code == 2);

    const CliResult calib = run({"calib", "--report", dir.file("report.json")});
    CHECK(calib.exit_code == 0);
    CHECK(calib.out.find("threshold,accuracy,coverage") != std::string::npos);

    // fixed-mode fusion also works
    CHECK(run({"fuse", "--a", dir.file("pred_a.csv"), "--b", dir.file("pred_b.csv"), "--mode",
               "fixed:0.5", "--out", dir.file("fused_fixed.csv")})
              .exit_code == 0);
}

TEST_CASE("re-running commands overwrites outputs identically") {
    TempDir dir;
    write_file(dir.file("synth.json"), kTinySynthConfig);
    write_file(dir.file("train.json"), kTinyTrainConfig);

    REQUIRE(run({"synth", "--config", dir.file("synth.json"), "--out", dir.file("bags.jsonl")})
                .exit_code == 0);
    const std::string bags_once = file_bytes(dir.file("bags.jsonl"));
    REQUIRE(run({"synth", "--config", dir.file("synth.json"), "--out", dir.file("bags.jsonl")})
                .exit_code == 0);
    CHECK(file_bytes(dir.file("bags.jsonl")) == bags_once);

    REQUIRE(run({"train", "--data", dir.file("bags.jsonl"), "--config", dir.file("train.json"),
                 "--out", dir.file("model.json")})
                .exit_code == 0);
    const std::string model_once = file_bytes(dir.file("model.json"));
    REQUIRE(run({"train", "--data", dir.file("bags.jsonl"), "--config", dir.file("train.json"),
                 "--out", dir.file("model.json")})
                .exit_code == 0);
    CHECK(file_bytes(dir.file("model.json")) == model_once);
}

TEST_CASE("seed and epoch flags override the config file") {
    TempDir dir;
    write_file(dir.file("synth.json"), kTinySynthConfig);
    write_file(dir.file("train.json"), kTinyTrainConfig);
    REQUIRE(run({"synth", "--config", dir.file("synth.json"), "--out", dir.file("bags.jsonl")})
                .exit_code == 0);

    REQUIRE(run({"train", "--data", dir.file("bags.jsonl"), "--config", dir.file("train.json"),
                 "--out", dir.file("m0.json"), "--seed", "0"})
                .exit_code == 0);
    REQUIRE(run({"train", "--data", dir.file("bags.jsonl"), "--config", dir.file("train.json"),
                 "--out", dir.file("m1.json"), "--seed", "1"})
                .exit_code == 0);
    CHECK(file_bytes(dir.file("m0.json")) != file_bytes(dir.file("m1.json")));

    REQUIRE(run({"train", "--data", dir.file("bags.jsonl"), "--config", dir.file("train.json"),
                 "--out", dir.file("m2.json"), "--epochs", "2"})
                .exit_code == 0);
    const auto ckpt = uamil::load_checkpoint(dir.file("m2.json"));
    CHECK(ckpt.epoch == 2);
}

TEST_CASE("ingest command builds bags from CSV") {
    TempDir dir;
    std::ostringstream csv;
    csv << "MMSI,BaseDateTime,LAT,LON,SOG,COG,VesselType\n";
    for (int v = 0; v < 2; ++v)
        for (int t = 0; t < 30; ++t) {
            csv << (v == 0 ? "100000001" : "100000002") << ",2020-01-01T00:"
                << (t < 10 ? "0" : "") << t << ":00,30.0,-80.0,10.0,90.0," << (v == 0 ? 30 : 70)
                << "\n";
        }
    write_file(dir.file("ais.csv"), csv.str());

    const CliResult res = run({"ingest", "--data", dir.file("ais.csv"), "--out",
                               dir.file("bags.jsonl"), "--task", "fishing", "--min-len", "10",
                               "--window", "10"});
    CHECK(res.exit_code == 0);
    const auto bags = uamil::read_bag_file(dir.file("bags.jsonl"));
    REQUIRE(bags.size() == 2);
    CHECK(bags[0].label == 1); // fishing vessel
    CHECK(bags[1].label == 0);
    CHECK(bags[0].instances.size() == 3);
}
