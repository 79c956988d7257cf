#include "koopagru/checkpoint.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <map>

namespace koopagru {
namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint arrays are written in host byte order");

namespace {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_array(const fs::path& path, const Matrix<float>& m) {
    const RowMajorF rm = m;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(float)));
}

Matrix<float> read_array(const fs::path& path, Index rows, Index cols) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const auto bytes = static_cast<Index>(in.tellg());
    if (bytes != rows * cols * static_cast<Index>(sizeof(float))) {
        throw IoError(path.string() + ": size does not match manifest shape");
    }
    in.seekg(0);
    RowMajorF rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(bytes));
    return rm;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& ck) {
    const fs::path root(dir);
    fs::create_directories(root / "arrays");

    json arrays = json::array();
    ck.state.params.for_each([&](const std::string& name, const Matrix<float>& p) {
        const std::string file = "arrays/" + name + ".bin";
        write_array(root / file, p);
        arrays.push_back({{"name", name}, {"file", file}, {"shape", {p.rows(), p.cols()}}, {"dtype", "<f4"}});
    });

    json manifest = {{"format_version", kCheckpointFormat},
                     {"code_version", ck.meta.code_version},
                     {"model_config", to_json(ck.state.config)},
                     {"frequency_selection", to_json(ck.state.selection)},
                     {"meta", {{"epoch", ck.meta.epoch}, {"val_loss", ck.meta.val_loss}, {"seed", ck.meta.seed}}},
                     {"arrays", arrays}};
    if (!ck.run_config.is_null()) manifest["run_config"] = ck.run_config;

    std::ofstream out(root / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in) throw IoError("no checkpoint manifest in " + dir);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError(dir + "/manifest.json: " + e.what());
    }
    if (manifest.value("format_version", 0) != kCheckpointFormat) throw IoError("unsupported checkpoint format in " + dir);

    Checkpoint ck;
    ck.state.config = model_config_from_json(manifest.at("model_config"));
    ck.state.config.validate();
    ck.state.selection = selection_from_json(manifest.at("frequency_selection"));
    ck.state.params.variant = EncoderParams<float>(ck.state.config.variant_encoder());
    ck.state.params.invariant = EncoderParams<float>(ck.state.config.invariant_encoder());
    const Index width = ck.state.config.observable_width();
    ck.state.params.k_var = Matrix<float>::Zero(width, width);
    ck.state.params.k_inv = Matrix<float>::Zero(ck.state.config.m, ck.state.config.m);

    std::map<std::string, json> entries;
    for (const auto& a : manifest.at("arrays")) entries[a.at("name").get<std::string>()] = a;
    ck.state.params.for_each([&](const std::string& name, Matrix<float>& p) {
        const auto it = entries.find(name);
        if (it == entries.end()) throw IoError("checkpoint is missing array " + name);
        const auto shape = it->second.at("shape").get<std::vector<Index>>();
        if (shape.size() != 2 || shape[0] != p.rows() || shape[1] != p.cols()) {
            throw IoError("array " + name + " has an unexpected shape");
        }
        p = read_array(root / it->second.at("file").get<std::string>(), shape[0], shape[1]);
    });

    const auto& meta = manifest.at("meta");
    ck.meta.epoch = meta.at("epoch").get<Index>();
    ck.meta.val_loss = meta.at("val_loss").get<double>();
    ck.meta.seed = meta.at("seed").get<std::uint64_t>();
    ck.meta.code_version = manifest.value("code_version", "");
    if (manifest.contains("run_config")) ck.run_config = manifest.at("run_config");
    return ck;
}

}  // namespace koopagru
