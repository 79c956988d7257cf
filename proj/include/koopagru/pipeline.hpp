#pragma once

#include "koopagru/checkpoint.hpp"
#include "koopagru/config.hpp"
#include "koopagru/detector.hpp"
#include "koopagru/trainer.hpp"

#include <string>
#include <vector>

namespace koopagru {

// End-to-end steps shared by the CLI subcommands. All artifacts land under
// config.out.

struct TrainOutcome {
    Checkpoint checkpoint;
    TrainReport report;
    std::string checkpoint_dir;
};

// Fits the frequency selection, trains, and writes checkpoint/, manifest.json,
// train_report.json, loss_curve.csv and loss_curve.svg.
TrainOutcome train_run(RunConfig config);

struct DetectOutcome {
    Detection detection;
    ScoreSeries val_scores;
    ScoreSeries test_scores;
    Eigen::VectorXi labels;
    bool has_labels = false;
};

// Calibrates on validation errors and scores the test partition. Writes
// scores.csv, metrics.json, detect_manifest.json and scores.svg.
DetectOutcome detect_run(const Checkpoint& checkpoint, const RunConfig& config);

struct SweepRow {
    std::string param;
    double value = 0.0;
    bool ok = false;
    std::string error;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double raw_f1 = 0.0;
};

// Parameter grids of the ablation protocol.
std::vector<double> default_grid(const std::string& param);

// One train+detect per value (r reuses a single trained model since it only
// affects calibration). Writes sweep.csv and sweep_summary.json.
std::vector<SweepRow> sweep_run(const RunConfig& base, const std::string& param, const std::vector<double>& values);

nlohmann::json metrics_json(const Detection& detection, bool adjusted, bool has_labels);

}  // namespace koopagru
