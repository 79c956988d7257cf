#include "koopagru/cli.hpp"
#include "koopagru/data_io.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace koopagru;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// A small labeled dataset and a config sized for quick runs.
struct Workspace {
    fs::path root;
    fs::path data;
    fs::path config;
};

Workspace workspace(const std::string& name) {
    Workspace w;
    w.root = testing::scratch(name);
    w.data = w.root / "data";
    REQUIRE(cli::run({"koopagru", "synth", "--out", w.data.string(), "--tones", "2:1:0,5:0.5:0.8", "--window", "20", "--windows", "30",
                      "--channels", "2", "--spikes", "3", "--seed", "1"}) == 0);
    w.config = w.root / "config.json";
    const json cfg = {
        {"dataset", {{"path", w.data.string()}, {"format", "csv"}, {"val_fraction", 0.3}}},
        {"model",
         {{"window", 20}, {"q", 8}, {"hidden1", 8}, {"hidden2", 8}, {"invariant_hidden", 8}, {"gru_layers_variant", 1},
          {"gru_layers_invariant", 1}}},
        {"train", {{"max_epochs", 2}, {"batch_size", 8}}},
        {"detect", {{"r", 1.0}}},
        {"out", (w.root / "run").string()}};
    std::ofstream(w.config) << cfg.dump(2);
    return w;
}

}  // namespace

TEST_CASE("synth writes train and test csv files") {
    const auto dir = testing::scratch("cli_synth") / "d";
    REQUIRE(cli::run({"koopagru", "synth", "--out", dir.string(), "--tones", "3", "--window", "20", "--windows", "10", "--channels",
                      "3", "--spikes", "2"}) == 0);
    const auto train = read_csv((dir / "train.csv").string());
    const auto test = read_csv((dir / "test.csv").string());
    CHECK(train.channels() == 3);
    CHECK(train.length() + test.length() == 200);
    REQUIRE(test.labels.has_value());
    CHECK(test.labels->sum() == 2);

    const auto lin = testing::scratch("cli_synth") / "lin";
    REQUIRE(cli::run({"koopagru", "synth", "--kind", "linear", "--out", lin.string(), "--steps", "50"}) == 0);
    const auto series = read_csv((lin / "series.csv").string());
    CHECK(series.length() == 50);
    CHECK(series.values(1, 0) == doctest::Approx(0.9));

    CHECK(cli::run({"koopagru", "synth", "--out", lin.string(), "--kind", "cubic"}) == cli::kExitConfig);
    // The default tones do not fit under Nyquist for a 20-sample window.
    CHECK(cli::run({"koopagru", "synth", "--out", lin.string(), "--window", "20"}) == cli::kExitConfig);
}

TEST_CASE("configuration failures exit with 2") {
    const auto dir = testing::scratch("cli_errors");
    CHECK(cli::run({"koopagru", "train", "--config", (dir / "absent.json").string()}) == cli::kExitConfig);
    CHECK(cli::run({"koopagru", "train", "--out", (dir / "o").string()}) == cli::kExitConfig);  // no dataset
    CHECK(cli::run({"koopagru", "train", "--bogus"}) == cli::kExitConfig);
    CHECK(cli::run({"koopagru"}) == cli::kExitConfig);
    CHECK(cli::run({"koopagru", "detect", "--checkpoint", (dir / "none").string()}) == cli::kExitConfig);

    std::ofstream(dir / "unknown.json") << R"({"model": {"gamma": 1}})";
    CHECK(cli::run({"koopagru", "train", "--config", (dir / "unknown.json").string()}) == cli::kExitConfig);
}

TEST_CASE("train then detect with overrides") {
    const auto w = workspace("cli_run");
    const auto out = w.root / "run";
    REQUIRE(cli::run({"koopagru", "train", "--config", w.config.string(), "--beta", "0.7", "--seed", "3"}) == 0);
    const json manifest = read_json(out / "manifest.json");
    CHECK(manifest["model"]["beta"] == 0.7);
    CHECK(manifest["train"]["seed"] == 3);
    CHECK(manifest["model"]["m"] == 2);
    const json report = read_json(out / "train_report.json");
    CHECK(report["epochs_run"] == 2);
    CHECK(fs::exists(out / "checkpoint" / "manifest.json"));
    CHECK(fs::exists(out / "loss_curve.svg"));

    REQUIRE(cli::run({"koopagru", "detect", "--out", out.string(), "--r", "4"}) == 0);
    const json dm = read_json(out / "detect_manifest.json");
    CHECK(dm["detect"]["r"] == 4.0);
    CHECK(dm["model"]["beta"] == 0.7);  // taken from the checkpoint
    const json metrics = read_json(out / "metrics.json");
    CHECK(metrics["adjusted"] == true);
    CHECK(metrics["r"] == 4.0);
    CHECK(metrics["f1"].get<double>() >= 0.0);
    CHECK(metrics["f1"].get<double>() <= 1.0);
    CHECK(metrics.contains("raw"));
    CHECK(read_text(out / "scores.csv").rfind("index,score,flag,label\n", 0) == 0);

    REQUIRE(cli::run({"koopagru", "detect", "--out", out.string(), "--no-point-adjust"}) == 0);
    const json raw = read_json(out / "metrics.json");
    CHECK(raw["adjusted"] == false);
    CHECK(raw["f1"] == raw["raw"]["f1"]);
}

TEST_CASE("sweep writes one row per value and is deterministic") {
    const auto w = workspace("cli_sweep");
    const auto out_a = w.root / "sweep_a";
    const auto out_b = w.root / "sweep_b";
    for (const auto& out : {out_a, out_b}) {
        REQUIRE(cli::run({"koopagru", "sweep", "--config", w.config.string(), "--param", "alpha", "--values", "0,1",
                          "--max-epochs", "1", "--out", out.string()}) == 0);
    }
    const std::string csv = read_text(out_a / "sweep.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("error") == std::string::npos);
    CHECK(csv == read_text(out_b / "sweep.csv"));
    CHECK(read_json(out_a / "sweep_summary.json")["points"] == 2);

    CHECK(cli::run({"koopagru", "sweep", "--config", w.config.string(), "--param", "window"}) == cli::kExitConfig);
}
