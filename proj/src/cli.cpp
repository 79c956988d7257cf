#include "koopagru/cli.hpp"

#include "koopagru/pipeline.hpp"
#include "koopagru/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace koopagru::cli {
namespace fs = std::filesystem;

namespace {

// Values given on the command line; each overrides the config file.
struct Overrides {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha, beta, lambda, r;
    std::optional<Index> window, max_epochs, batch_size, q, layers_variant, layers_invariant;
    std::optional<double> learning_rate;
    std::optional<std::string> data_path, format;
    std::optional<Index> dims;
    std::optional<double> val_fraction;
    bool no_point_adjust = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON run configuration");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--alpha", o.alpha, "fraction of dominant frequency bins");
    cmd->add_option("--beta", o.beta, "weight of the time-invariant branch");
    cmd->add_option("--lambda", o.lambda, "operator-norm regularization weight");
    cmd->add_option("--r", o.r, "anomaly ratio in percent");
    cmd->add_option("--window", o.window, "lookback window length");
    cmd->add_option("--max-epochs", o.max_epochs, "epoch cap");
    cmd->add_option("--batch-size", o.batch_size);
    cmd->add_option("--learning-rate", o.learning_rate);
    cmd->add_option("--q", o.q, "observable dimension (variant GRU width)");
    cmd->add_option("--gru-layers-variant", o.layers_variant);
    cmd->add_option("--gru-layers-invariant", o.layers_invariant);
    cmd->add_option("--data-path", o.data_path, "dataset file or directory");
    cmd->add_option("--format", o.format, "csv or npy-directory");
    cmd->add_option("--dims", o.dims, "declared channel count");
    cmd->add_option("--val-fraction", o.val_fraction, "validation share of train when no val split ships");
    cmd->add_flag("--no-point-adjust", o.no_point_adjust, "report raw point-wise metrics");
}

RunConfig resolve(const Overrides& o, std::optional<RunConfig> base = std::nullopt) {
    RunConfig c;
    if (!o.config.empty()) {
        c = load_run_config(o.config);
    } else if (base) {
        c = *base;
    }
    if (o.out) c.out = *o.out;
    if (o.seed) c.train.seed = *o.seed;
    if (o.alpha) c.model.alpha = *o.alpha;
    if (o.beta) c.model.beta = *o.beta;
    if (o.lambda) c.model.lambda_reg = *o.lambda;
    if (o.r) c.detect.r = *o.r;
    if (o.window) c.model.window = *o.window;
    if (o.max_epochs) c.train.max_epochs = *o.max_epochs;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.learning_rate) c.train.learning_rate = *o.learning_rate;
    if (o.q) c.model.q = *o.q;
    if (o.layers_variant) c.model.gru_layers_variant = *o.layers_variant;
    if (o.layers_invariant) c.model.gru_layers_invariant = *o.layers_invariant;
    if (o.data_path) c.dataset.path = *o.data_path;
    if (o.format) c.dataset.format = parse_data_format(*o.format);
    if (o.dims) c.dataset.dims = *o.dims;
    if (o.val_fraction) c.dataset.val_fraction = *o.val_fraction;
    if (o.no_point_adjust) c.detect.point_adjust = false;
    if (c.dataset.path.empty()) throw ConfigError("no dataset path (set dataset.path or --data-path)");
    return c;
}

struct SynthOptions {
    std::string out;
    std::string kind = "sine";
    std::string tones = "4:1:0,11:0.5:0.8";
    Index window = 100;
    Index windows = 200;
    Index channels = 3;
    std::optional<double> noise;
    double test_fraction = 0.2;
    Index spikes = 10;
    double magnitude = 1.5;
    Index width = 1;
    std::string anomaly = "spike";
    std::uint64_t seed = 0;
    std::string matrix = "0.9,0;0,0.5";
    std::string x0 = "1,1";
    Index steps = 1000;
};

std::vector<double> parse_list(const std::string& s, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

void run_synth(const SynthOptions& o) {
    fs::create_directories(o.out);
    if (o.kind == "linear") {
        synth::LinearSystemSpec spec;
        std::vector<std::vector<double>> rows;
        std::stringstream ss(o.matrix);
        std::string row;
        while (std::getline(ss, row, ';')) rows.push_back(parse_list(row, ','));
        const auto m = static_cast<Index>(rows.size());
        spec.A.resize(m, m);
        for (Index i = 0; i < m; ++i) {
            if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != m) throw ConfigError("--matrix must be square");
            for (Index j = 0; j < m; ++j) spec.A(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        const auto x0 = parse_list(o.x0, ',');
        spec.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Index>(x0.size()));
        spec.steps = o.steps;
        spec.noise_std = o.noise.value_or(0.0);
        spec.seed = o.seed;
        write_csv((fs::path(o.out) / "series.csv").string(), synth::gen_linear_system(spec));
        return;
    }
    if (o.kind != "sine") throw ConfigError("--kind must be sine or linear");

    synth::SpikeFixtureSpec spec;
    spec.tones.clear();
    std::stringstream ss(o.tones);
    std::string tone;
    while (std::getline(ss, tone, ',')) {
        const auto parts = parse_list(tone, ':');
        if (parts.empty() || parts.size() > 3) throw ConfigError("--tones entries are freq[:amp[:phase]]");
        spec.tones.push_back({parts[0], parts.size() > 1 ? parts[1] : 1.0, parts.size() > 2 ? parts[2] : 0.0});
    }
    spec.window = o.window;
    spec.n_windows = o.windows;
    spec.channels = o.channels;
    if (o.noise) spec.noise_std = *o.noise;
    spec.test_fraction = o.test_fraction;
    spec.n_spikes = o.spikes;
    spec.magnitude = o.magnitude;
    spec.width = o.width;
    spec.seed = o.seed;
    if (o.anomaly == "spike") {
        spec.kind = synth::AnomalyKind::Spike;
    } else if (o.anomaly == "level_shift") {
        spec.kind = synth::AnomalyKind::LevelShift;
    } else if (o.anomaly == "freq_shift") {
        spec.kind = synth::AnomalyKind::FreqShift;
    } else {
        throw ConfigError("--anomaly must be spike, level_shift or freq_shift");
    }
    const auto fixture = synth::make_spike_fixture(spec);
    write_csv((fs::path(o.out) / "train.csv").string(), fixture.train);
    write_csv((fs::path(o.out) / "test.csv").string(), fixture.test);
}

void print_metrics(const Detection& d, bool has_labels) {
    std::cout << "delta=" << d.threshold.delta << " (r=" << d.threshold.r << ")\n";
    if (!has_labels) return;
    std::cout << "raw:            P=" << d.raw.precision << " R=" << d.raw.recall << " F1=" << d.raw.f1 << '\n'
              << "point-adjusted: P=" << d.adjusted.precision << " R=" << d.adjusted.recall << " F1=" << d.adjusted.f1
              << '\n';
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Koopman/GRU time-series anomaly detection"};
    app.require_subcommand(1);

    SynthOptions so;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset as CSV");
    synth_cmd->add_option("--out", so.out, "output directory")->required();
    synth_cmd->add_option("--kind", so.kind, "sine or linear");
    synth_cmd->add_option("--tones", so.tones, "freq:amp:phase,... in cycles per window");
    synth_cmd->add_option("--window", so.window);
    synth_cmd->add_option("--windows", so.windows, "series length in windows");
    synth_cmd->add_option("--channels", so.channels);
    synth_cmd->add_option("--noise", so.noise, "gaussian noise std");
    synth_cmd->add_option("--test-fraction", so.test_fraction);
    synth_cmd->add_option("--spikes", so.spikes, "number of injected anomalies");
    synth_cmd->add_option("--magnitude", so.magnitude);
    synth_cmd->add_option("--width", so.width);
    synth_cmd->add_option("--anomaly", so.anomaly, "spike, level_shift or freq_shift");
    synth_cmd->add_option("--seed", so.seed);
    synth_cmd->add_option("--matrix", so.matrix, "linear kind: rows separated by ';'");
    synth_cmd->add_option("--x0", so.x0, "linear kind: initial state");
    synth_cmd->add_option("--steps", so.steps, "linear kind: series length");

    Overrides train_o;
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(train_cmd, train_o);

    Overrides detect_o;
    std::string checkpoint_dir;
    auto* detect_cmd = app.add_subcommand("detect", "calibrate a threshold and score the test split");
    add_common(detect_cmd, detect_o);
    detect_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint directory (default <out>/checkpoint)");

    Overrides sweep_o;
    std::string sweep_param;
    std::vector<double> sweep_values;
    auto* sweep_cmd = app.add_subcommand("sweep", "train+detect over a hyperparameter grid");
    add_common(sweep_cmd, sweep_o);
    sweep_cmd->add_option("--param", sweep_param, "alpha, beta, lambda or r")->required();
    sweep_cmd->add_option("--values", sweep_values, "grid values (default: ablation grid)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (synth_cmd->parsed()) {
            run_synth(so);
            std::cout << "wrote " << so.out << '\n';
        } else if (train_cmd->parsed()) {
            const auto cfg = resolve(train_o);
            const auto outcome = train_run(cfg);
            std::cout << "trained " << outcome.report.train_loss.size() << " epochs, best val loss "
                      << outcome.report.best_val_loss << " at epoch " << outcome.report.best_epoch << "\ncheckpoint: "
                      << outcome.checkpoint_dir << '\n';
        } else if (detect_cmd->parsed()) {
            if (checkpoint_dir.empty()) {
                if (!detect_o.out && detect_o.config.empty()) throw ConfigError("detect needs --checkpoint or --out");
                const std::string out = detect_o.out ? *detect_o.out : load_run_config(detect_o.config).out;
                checkpoint_dir = (fs::path(out) / "checkpoint").string();
            }
            if (!fs::exists(fs::path(checkpoint_dir) / "manifest.json")) {
                throw ConfigError("no checkpoint at " + checkpoint_dir);
            }
            const Checkpoint ck = load_checkpoint(checkpoint_dir);
            std::optional<RunConfig> base;
            if (!ck.run_config.is_null()) base = run_config_from_json(ck.run_config);
            const auto cfg = resolve(detect_o, base);
            const auto outcome = detect_run(ck, cfg);
            print_metrics(outcome.detection, outcome.has_labels);
        } else if (sweep_cmd->parsed()) {
            const auto cfg = resolve(sweep_o);
            const auto values = sweep_values.empty() ? default_grid(sweep_param) : sweep_values;
            const auto rows = sweep_run(cfg, sweep_param, values);
            for (const auto& row : rows) {
                std::cout << sweep_param << '=' << row.value << "  "
                          << (row.ok ? "F1=" + std::to_string(row.f1) : "error: " + row.error) << '\n';
            }
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DatasetDimensionError& e) {
        std::cerr << "dataset error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataQualityError& e) {
        std::cerr << "dataset error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const WindowingError& e) {
        std::cerr << "dataset error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const SpecError& e) {
        std::cerr << "invalid synthetic spec: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UnstableSystemError& e) {
        std::cerr << "invalid synthetic spec: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    argv.reserve(copy.size());
    for (auto& a : copy) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace koopagru::cli
