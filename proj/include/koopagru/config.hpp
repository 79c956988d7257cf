#pragma once

#include "koopagru/data_io.hpp"
#include "koopagru/detector.hpp"
#include "koopagru/model.hpp"
#include "koopagru/trainer.hpp"

#include <json.hpp>

#include <string>

namespace koopagru {

struct DetectConfig {
    double r = 0.5;
    bool point_adjust = true;
    PercentileRule rule = PercentileRule::UpperTail;
};

// Everything a run needs. JSON layout:
//   {"dataset": {...}, "model": {...}, "train": {...}, "detect": {...}, "out": "..."}
// Unknown keys are rejected at every level.
struct RunConfig {
    DatasetSpec dataset;
    ModelConfig model;
    TrainConfig train;
    DetectConfig detect;
    std::string out = "runs/latest";

    void validate() const;
};

nlohmann::json to_json(const DatasetSpec& spec);
nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const DetectConfig& config);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const FrequencySelection& selection);

DatasetSpec dataset_spec_from_json(const nlohmann::json& j, DatasetSpec base = {});
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
DetectConfig detect_config_from_json(const nlohmann::json& j, DetectConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j);
FrequencySelection selection_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);

}  // namespace koopagru
