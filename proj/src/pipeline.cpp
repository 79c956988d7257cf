#include "koopagru/pipeline.hpp"

#include "koopagru/plot.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace koopagru {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json run_manifest(const RunConfig& config) {
    json j = to_json(config);
    j["version"] = kVersion;
    return j;
}

json result_json(const DetectionResult& r) {
    return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}};
}

std::string format_value(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

TrainOutcome train_run(RunConfig config) {
    const DatasetSplit split = load_dataset(config.dataset);
    if (config.model.m == 0) config.model.m = split.train.channels();
    if (config.model.m != split.train.channels()) {
        throw DatasetDimensionError("model.m does not match the dataset channel count");
    }
    config.validate();

    const fs::path out(config.out);
    fs::create_directories(out);
    write_json(out / "manifest.json", run_manifest(config));

    const auto selection = fit_dominant_spectrum(make_windows(split.train, config.model.window), config.model.alpha);
    auto initial = init_model<float>(config.model, selection, config.train.seed);
    auto result = train(std::move(initial), split, config.train);

    TrainOutcome outcome;
    outcome.report = result.report;
    outcome.checkpoint.state = std::move(result.state);
    outcome.checkpoint.meta.epoch = result.report.best_epoch;
    outcome.checkpoint.meta.val_loss = result.report.best_val_loss;
    outcome.checkpoint.meta.seed = config.train.seed;
    outcome.checkpoint.run_config = run_manifest(config);
    outcome.checkpoint_dir = (out / "checkpoint").string();
    save_checkpoint(outcome.checkpoint_dir, outcome.checkpoint);

    const auto& report = outcome.report;
    {
        std::ofstream csv(out / "loss_curve.csv");
        csv << std::setprecision(17) << "epoch,train_loss,val_loss\n";
        for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
            csv << e << ',' << report.train_loss[e] << ',' << report.val_loss[e] << '\n';
        }
    }
    plot::write_lines((out / "loss_curve.svg").string(), "training loss",
                      {{"train", report.train_loss, "#1f77b4"}, {"validation", report.val_loss, "#ff7f0e"}}, "epoch",
                      "loss");
    write_json(out / "train_report.json", {{"best_epoch", report.best_epoch},
                                      {"best_val_loss", report.best_val_loss},
                                      {"epochs_run", report.train_loss.size()},
                                      {"stopped_early", report.stopped_early},
                                      {"train_loss", report.train_loss},
                                      {"val_loss", report.val_loss},
                                      {"parameter_count", outcome.checkpoint.state.params.parameter_count()}});
    return outcome;
}

json metrics_json(const Detection& d, bool adjusted, bool has_labels) {
    json j = {{"adjusted", adjusted}, {"r", d.threshold.r}, {"delta", d.threshold.delta}};
    if (!has_labels) return j;
    const auto& primary = adjusted ? d.adjusted : d.raw;
    j.update(result_json(primary));
    j["raw"] = result_json(d.raw);
    j["point_adjusted"] = result_json(d.adjusted);
    return j;
}

DetectOutcome detect_run(const Checkpoint& checkpoint, const RunConfig& config) {
    const auto& state = checkpoint.state;
    DatasetSpec spec = config.dataset;
    const DatasetSplit split = load_dataset(spec);
    if (split.train.channels() != state.config.m) {
        throw DatasetDimensionError("dataset channel count does not match the checkpoint");
    }
    const Index window = state.config.window;

    DetectOutcome outcome;
    outcome.val_scores = evaluate_val_errors(state, make_windows(split.val, window));
    const auto threshold = calibrate_threshold(outcome.val_scores, config.detect.r, config.detect.rule);
    const auto test_windows = make_windows(split.test, window);
    outcome.test_scores = score_test(state, test_windows);
    outcome.has_labels = test_windows.has_labels();
    outcome.labels = outcome.has_labels ? windowed_labels(test_windows)
                                        : Eigen::VectorXi::Zero(outcome.test_scores.scores.size());
    outcome.detection = detect(outcome.test_scores, outcome.labels, threshold);

    const fs::path out(config.out);
    fs::create_directories(out);
    json manifest = run_manifest(config);
    manifest["checkpoint_meta"] = {{"epoch", checkpoint.meta.epoch}, {"seed", checkpoint.meta.seed}};
    write_json(out / "detect_manifest.json", manifest);
    write_json(out / "metrics.json", metrics_json(outcome.detection, config.detect.point_adjust, outcome.has_labels));

    const auto& flags = config.detect.point_adjust ? outcome.detection.raw.adjusted_flags : outcome.detection.raw.flags;
    std::ofstream csv(out / "scores.csv");
    if (!csv) throw IoError("cannot write scores.csv");
    csv << std::setprecision(17) << "index,score,flag,label\n";
    for (Index i = 0; i < outcome.test_scores.scores.size(); ++i) {
        csv << outcome.test_scores.index[static_cast<std::size_t>(i)] << ',' << outcome.test_scores.scores(i) << ','
            << flags(i) << ',' << outcome.labels(i) << '\n';
    }
    plot::write_scores((out / "scores.svg").string(), outcome.test_scores.scores, threshold.delta, outcome.labels);
    return outcome;
}

std::vector<double> default_grid(const std::string& param) {
    if (param == "alpha") return {0.0, 0.1, 0.5, 1.0};
    if (param == "beta") return {0.0, 0.1, 0.3, 0.5, 0.8, 1.0};
    if (param == "lambda") return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    if (param == "r") return {0.5, 1.0, 4.0, 5.0};
    throw ConfigError("cannot sweep '" + param + "' (expected alpha, beta, lambda or r)");
}

std::vector<SweepRow> sweep_run(const RunConfig& base, const std::string& param, const std::vector<double>& values) {
    default_grid(param);  // validates the parameter name
    const fs::path root(base.out);
    fs::create_directories(root);

    std::vector<SweepRow> rows;
    std::optional<Checkpoint> shared;  // r sweeps train once
    for (const double value : values) {
        SweepRow row;
        row.param = param;
        row.value = value;
        RunConfig cfg = base;
        cfg.out = (root / (param + "_" + format_value(value))).string();
        try {
            if (param == "alpha") cfg.model.alpha = value;
            if (param == "beta") cfg.model.beta = value;
            if (param == "lambda") cfg.model.lambda_reg = value;
            if (param == "r") cfg.detect.r = value;
            // train_run validates once the channel count is known.
            if (param == "r") {
                if (!shared) {
                    RunConfig train_cfg = cfg;
                    train_cfg.out = (root / "r_model").string();
                    shared = train_run(train_cfg).checkpoint;
                }
            }
            const Checkpoint ck = param == "r" ? *shared : train_run(cfg).checkpoint;
            const auto det = detect_run(ck, cfg);
            const auto& primary = cfg.detect.point_adjust ? det.detection.adjusted : det.detection.raw;
            row.ok = true;
            row.f1 = primary.f1;
            row.precision = primary.precision;
            row.recall = primary.recall;
            row.raw_f1 = det.detection.raw.f1;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
    }

    std::ofstream csv(root / "sweep.csv");
    csv << std::setprecision(17) << param << ",f1,precision,recall,raw_f1,status\n";
    const SweepRow* best = nullptr;
    for (const auto& row : rows) {
        csv << row.value << ',' << row.f1 << ',' << row.precision << ',' << row.recall << ',' << row.raw_f1 << ','
            << (row.ok ? "ok" : "error: " + row.error) << '\n';
        if (row.ok && (!best || row.f1 > best->f1)) best = &row;
    }
    json summary = {{"param", param}, {"points", rows.size()}};
    if (best) summary["best"] = {{"value", best->value}, {"f1", best->f1}, {"precision", best->precision},
                                 {"recall", best->recall}};
    write_json(root / "sweep_summary.json", summary);
    return rows;
}

}  // namespace koopagru
