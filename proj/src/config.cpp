#include "koopagru/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

namespace koopagru {
using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!keys.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (!(detect.r > 0.0 && detect.r < 100.0)) throw ConfigError("detect.r must be in (0, 100)");
    if (dataset.path.empty()) throw ConfigError("dataset.path is required");
    if (dataset.dims > 0 && model.m > 0 && dataset.dims != model.m) {
        throw ConfigError("dataset.dims and model.m disagree");
    }
}

json to_json(const DatasetSpec& spec) {
    return {{"path", spec.path},
            {"format", to_string(spec.format)},
            {"dims", spec.dims},
            {"val_fraction", spec.val_fraction},
            {"train_fraction", spec.train_fraction},
            {"impute", spec.impute}};
}

json to_json(const ModelConfig& c) {
    return {{"alpha", c.alpha},
            {"beta", c.beta},
            {"lambda", c.lambda_reg},
            {"window", c.window},
            {"m", c.m},
            {"q", c.q},
            {"hidden1", c.hidden1},
            {"hidden2", c.hidden2},
            {"invariant_hidden", c.invariant_hidden},
            {"gru_layers_variant", c.gru_layers_variant},
            {"gru_layers_invariant", c.gru_layers_invariant},
            {"dropout", c.dropout},
            {"squared_loss", c.squared_loss},
            {"norm_flags",
             {{"var_norm", c.norm_flags.var_norm},
              {"var_denorm", c.norm_flags.var_denorm},
              {"inv_norm", c.norm_flags.inv_norm},
              {"inv_denorm", c.norm_flags.inv_denorm}}}};
}

json to_json(const TrainConfig& c) {
    json j = {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
              {"patience", c.patience},           {"seed", c.seed},             {"micro_batch", c.micro_batch}};
    j["grad_clip"] = c.grad_clip ? json(*c.grad_clip) : json(nullptr);
    return j;
}

json to_json(const DetectConfig& c) {
    return {{"r", c.r},
            {"point_adjust", c.point_adjust},
            {"percentile_rule", c.rule == PercentileRule::UpperTail ? "upper_tail" : "literal"}};
}

json to_json(const RunConfig& c) {
    return {{"dataset", to_json(c.dataset)},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"detect", to_json(c.detect)},
            {"out", c.out}};
}

json to_json(const FrequencySelection& s) {
    return {{"alpha", s.alpha},
            {"window", s.window_length},
            {"spectrum_size", s.spectrum_size},
            {"dominant", s.dominant},
            {"mean_amplitude", std::vector<double>(s.mean_amplitude.data(), s.mean_amplitude.data() + s.mean_amplitude.size())}};
}

DatasetSpec dataset_spec_from_json(const json& j, DatasetSpec s) {
    const std::string where = "dataset";
    require_object(j, where, {"path", "format", "dims", "val_fraction", "train_fraction", "impute"});
    read(j, "path", s.path, where);
    if (j.contains("format")) s.format = parse_data_format(j.at("format").get<std::string>());
    read(j, "dims", s.dims, where);
    read(j, "val_fraction", s.val_fraction, where);
    read(j, "train_fraction", s.train_fraction, where);
    read(j, "impute", s.impute, where);
    return s;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
    const std::string where = "model";
    require_object(j, where,
                   {"alpha", "beta", "lambda", "window", "m", "q", "hidden1", "hidden2", "invariant_hidden",
                    "gru_layers_variant", "gru_layers_invariant", "dropout", "squared_loss", "norm_flags"});
    read(j, "alpha", c.alpha, where);
    read(j, "beta", c.beta, where);
    read(j, "lambda", c.lambda_reg, where);
    read(j, "window", c.window, where);
    read(j, "m", c.m, where);
    read(j, "q", c.q, where);
    read(j, "hidden1", c.hidden1, where);
    read(j, "hidden2", c.hidden2, where);
    read(j, "invariant_hidden", c.invariant_hidden, where);
    read(j, "gru_layers_variant", c.gru_layers_variant, where);
    read(j, "gru_layers_invariant", c.gru_layers_invariant, where);
    read(j, "dropout", c.dropout, where);
    read(j, "squared_loss", c.squared_loss, where);
    if (j.contains("norm_flags")) {
        const auto& f = j.at("norm_flags");
        const std::string fw = "model.norm_flags";
        require_object(f, fw, {"var_norm", "var_denorm", "inv_norm", "inv_denorm"});
        read(f, "var_norm", c.norm_flags.var_norm, fw);
        read(f, "var_denorm", c.norm_flags.var_denorm, fw);
        read(f, "inv_norm", c.norm_flags.inv_norm, fw);
        read(f, "inv_denorm", c.norm_flags.inv_denorm, fw);
    }
    return c;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    const std::string where = "train";
    require_object(j, where,
                   {"learning_rate", "batch_size", "max_epochs", "patience", "seed", "grad_clip", "micro_batch"});
    read(j, "learning_rate", c.learning_rate, where);
    read(j, "batch_size", c.batch_size, where);
    read(j, "max_epochs", c.max_epochs, where);
    read(j, "patience", c.patience, where);
    read(j, "seed", c.seed, where);
    read(j, "micro_batch", c.micro_batch, where);
    if (j.contains("grad_clip")) {
        if (j.at("grad_clip").is_null()) {
            c.grad_clip.reset();
        } else {
            double clip = 0.0;
            read(j, "grad_clip", clip, where);
            c.grad_clip = clip;
        }
    }
    return c;
}

DetectConfig detect_config_from_json(const json& j, DetectConfig c) {
    const std::string where = "detect";
    require_object(j, where, {"r", "point_adjust", "percentile_rule"});
    read(j, "r", c.r, where);
    read(j, "point_adjust", c.point_adjust, where);
    if (j.contains("percentile_rule")) {
        const auto rule = j.at("percentile_rule").get<std::string>();
        if (rule == "upper_tail") {
            c.rule = PercentileRule::UpperTail;
        } else if (rule == "literal") {
            c.rule = PercentileRule::Literal;
        } else {
            throw ConfigError("detect.percentile_rule must be upper_tail or literal");
        }
    }
    return c;
}

RunConfig run_config_from_json(const json& j) {
    require_object(j, "config", {"dataset", "model", "train", "detect", "out", "version"});
    RunConfig c;
    if (j.contains("dataset")) c.dataset = dataset_spec_from_json(j.at("dataset"));
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("detect")) c.detect = detect_config_from_json(j.at("detect"));
    read(j, "out", c.out, "config");
    return c;
}

FrequencySelection selection_from_json(const json& j) {
    require_object(j, "frequency_selection", {"alpha", "window", "spectrum_size", "dominant", "mean_amplitude"});
    const auto amplitude = j.at("mean_amplitude").get<std::vector<double>>();
    FrequencySelection s;
    s.alpha = j.at("alpha").get<double>();
    s.window_length = j.at("window").get<Index>();
    s.spectrum_size = j.at("spectrum_size").get<Index>();
    s.mean_amplitude = Eigen::Map<const Eigen::VectorXd>(amplitude.data(), static_cast<Index>(amplitude.size()));
    s.dominant = j.at("dominant").get<std::vector<Index>>();
    if (s.spectrum_size != s.window_length / 2 + 1 || s.mean_amplitude.size() != s.spectrum_size) {
        throw ConfigError("frequency selection shape is inconsistent");
    }
    return s;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace koopagru
