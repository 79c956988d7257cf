#pragma once

#include "koopagru/config.hpp"
#include "koopagru/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace koopagru {

inline constexpr int kCheckpointFormat = 1;

struct CheckpointMeta {
    Index epoch = -1;
    double val_loss = 0.0;
    std::uint64_t seed = 0;
    std::string code_version = kVersion;
};

struct Checkpoint {
    ModelState<float> state;
    CheckpointMeta meta;
    nlohmann::json run_config;  // resolved run configuration, may be null
};

// Directory layout: manifest.json plus arrays/<name>.bin, each a row-major
// little-endian float32 array whose shape is recorded in the manifest.
void save_checkpoint(const std::string& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace koopagru
