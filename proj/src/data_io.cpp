#include "koopagru/data_io.hpp"

#include "koopagru/npy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace koopagru {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) {
        out = std::nan("");
        return true;
    }
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end != s.c_str() && *end == '\0';
}

// Forward-fill non-finite entries per channel; leading gaps take the first
// finite value (or zero for an all-missing channel).
void impute_in_place(Eigen::MatrixXd& values) {
    for (Index c = 0; c < values.cols(); ++c) {
        auto col = values.col(c);
        double first = 0.0;
        for (Index t = 0; t < col.size(); ++t) {
            if (std::isfinite(col(t))) {
                first = col(t);
                break;
            }
        }
        double last = first;
        for (Index t = 0; t < col.size(); ++t) {
            if (std::isfinite(col(t))) {
                last = col(t);
            } else {
                col(t) = last;
            }
        }
    }
}

void check_quality(RawSeries& series, bool impute, const std::string& what) {
    if (series.values.allFinite()) return;
    if (!impute) throw DataQualityError(what + " contains NaN/Inf and imputation is disabled");
    impute_in_place(series.values);
}

RawSeries slice(const RawSeries& series, Index begin, Index count) {
    RawSeries out;
    out.values = series.values.middleRows(begin, count);
    out.channel_names = series.channel_names;
    if (series.labels) out.labels = series.labels->segment(begin, count);
    return out;
}

Eigen::VectorXi to_labels(const Eigen::MatrixXd& raw, const std::string& path) {
    if (raw.cols() != 1) throw IoError(path + ": label array must be one-dimensional");
    Eigen::VectorXi labels(raw.rows());
    for (Index t = 0; t < raw.rows(); ++t) labels(t) = raw(t, 0) != 0.0 ? 1 : 0;
    return labels;
}

RawSeries load_npy_series(const fs::path& values_path, const fs::path& labels_path) {
    RawSeries series;
    series.values = npy::load(values_path.string());
    if (fs::exists(labels_path)) {
        series.labels = to_labels(npy::load(labels_path.string()), labels_path.string());
        if (series.labels->size() != series.length()) {
            throw DatasetDimensionError(labels_path.string() + ": label length does not match values");
        }
    }
    return series;
}

}  // namespace

DataFormat parse_data_format(const std::string& name) {
    const auto n = lower(name);
    if (n == "csv") return DataFormat::Csv;
    if (n == "npy" || n == "npy-directory" || n == "npy_directory") return DataFormat::NpyDirectory;
    throw ConfigError("unknown data format '" + name + "' (expected csv or npy-directory)");
}

std::string to_string(DataFormat format) {
    return format == DataFormat::Csv ? "csv" : "npy-directory";
}

Standardization Standardization::fit(const Eigen::MatrixXd& values) {
    Standardization s;
    const Index n = values.rows();
    s.mean = values.colwise().mean().transpose();
    s.std.resize(values.cols());
    for (Index c = 0; c < values.cols(); ++c) {
        if (n > 0 && values.col(c).maxCoeff() == values.col(c).minCoeff()) {
            s.mean(c) = values(0, c);
            s.std(c) = kStdEpsilon;
            continue;
        }
        const double var = (values.col(c).array() - s.mean(c)).square().mean();
        s.std(c) = std::max(std::sqrt(var), kStdEpsilon);
    }
    return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& values) const {
    return (values.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

RawSeries read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> header;
    std::string line;
    bool first = true;
    std::size_t width = 0;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        std::vector<double> row(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) numeric = parse_number(fields[i], row[i]) && numeric;
        if (first) {
            first = false;
            width = fields.size();
            if (!numeric) {
                header = fields;
                continue;
            }
        }
        if (!numeric) throw IoError(path + ":" + std::to_string(line_no) + ": non-numeric field");
        if (fields.size() != width) throw IoError(path + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }

    std::optional<std::size_t> label_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = lower(header[i]);
        if (name == "label" || name == "anomaly") label_col = i;
    }

    RawSeries series;
    const Index channels = static_cast<Index>(width) - (label_col ? 1 : 0);
    series.values.resize(static_cast<Index>(rows.size()), channels);
    if (label_col) series.labels = Eigen::VectorXi(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!label_col || i != *label_col) series.channel_names.push_back(header[i]);
    }
    for (std::size_t t = 0; t < rows.size(); ++t) {
        Index c = 0;
        for (std::size_t i = 0; i < width; ++i) {
            if (label_col && i == *label_col) {
                (*series.labels)(static_cast<Index>(t)) = rows[t][i] != 0.0 ? 1 : 0;
            } else {
                series.values(static_cast<Index>(t), c++) = rows[t][i];
            }
        }
    }
    return series;
}

void write_csv(const std::string& path, const RawSeries& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << std::setprecision(17);
    for (Index c = 0; c < series.channels(); ++c) {
        if (c) out << ',';
        if (static_cast<std::size_t>(c) < series.channel_names.size()) {
            out << series.channel_names[static_cast<std::size_t>(c)];
        } else {
            out << "ch" << c;
        }
    }
    if (series.labels) out << ",label";
    out << '\n';
    for (Index t = 0; t < series.length(); ++t) {
        for (Index c = 0; c < series.channels(); ++c) {
            if (c) out << ',';
            out << series.values(t, c);
        }
        if (series.labels) out << ',' << (*series.labels)(t);
        out << '\n';
    }
}

DatasetSplit load_dataset(const DatasetSpec& spec) {
    const fs::path root(spec.path);
    if (!fs::exists(root)) throw IoError("dataset path does not exist: " + spec.path);
    if (spec.val_fraction < 0.0 || spec.val_fraction >= 1.0) throw ConfigError("val_fraction must be in [0, 1)");

    RawSeries train;
    RawSeries test;
    std::optional<RawSeries> val;

    if (spec.format == DataFormat::NpyDirectory) {
        if (!fs::is_directory(root)) throw IoError(spec.path + " is not a directory");
        train = load_npy_series(root / "train.npy", root / "train_label.npy");
        test = load_npy_series(root / "test.npy", root / "test_label.npy");
        if (fs::exists(root / "val.npy")) val = load_npy_series(root / "val.npy", root / "val_label.npy");
    } else if (fs::is_directory(root)) {
        train = read_csv((root / "train.csv").string());
        test = read_csv((root / "test.csv").string());
        if (fs::exists(root / "val.csv")) val = read_csv((root / "val.csv").string());
    } else {
        const RawSeries all = read_csv(spec.path);
        if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
            throw ConfigError("train_fraction must be in (0, 1)");
        }
        const auto n_train = static_cast<Index>(std::floor(spec.train_fraction * static_cast<double>(all.length())));
        train = slice(all, 0, n_train);
        test = slice(all, n_train, all.length() - n_train);
    }

    auto check_dims = [&](const RawSeries& s, const std::string& what) {
        if (spec.dims > 0 && s.channels() != spec.dims) {
            throw DatasetDimensionError(what + " has " + std::to_string(s.channels()) + " channels, declared " +
                                        std::to_string(spec.dims));
        }
    };
    check_dims(train, "train");
    check_dims(test, "test");
    if (val) check_dims(*val, "val");
    if (test.channels() != train.channels() || (val && val->channels() != train.channels())) {
        throw DatasetDimensionError("partitions disagree on channel count");
    }

    check_quality(train, spec.impute, "train");
    check_quality(test, spec.impute, "test");
    if (val) check_quality(*val, spec.impute, "val");

    DatasetSplit split;
    if (val) {
        split.train = std::move(train);
        split.val = std::move(*val);
    } else {
        const auto n_val = static_cast<Index>(std::llround(spec.val_fraction * static_cast<double>(train.length())));
        split.train = slice(train, 0, train.length() - n_val);
        split.val = slice(train, train.length() - n_val, n_val);
    }
    split.test = std::move(test);
    // Train-only labels carry no meaning for an unsupervised fit.
    split.train.labels.reset();

    split.standardization = Standardization::fit(split.train.values);
    split.train.values = split.standardization.apply(split.train.values);
    split.val.values = split.standardization.apply(split.val.values);
    split.test.values = split.standardization.apply(split.test.values);
    return split;
}

WindowBatch make_windows(const RawSeries& series, Index window) {
    if (window <= 0) throw WindowingError("window length must be positive");
    if (series.length() < window) {
        throw WindowingError("series of length " + std::to_string(series.length()) + " is shorter than window " +
                             std::to_string(window));
    }
    WindowBatch batch;
    const Index count = series.length() / window;
    batch.windows.reserve(static_cast<std::size_t>(count));
    for (Index b = 0; b < count; ++b) {
        const Index origin = b * window;
        batch.windows.emplace_back(series.values.middleRows(origin, window));
        batch.origins.push_back(origin);
        if (series.labels) batch.labels.emplace_back(series.labels->segment(origin, window));
    }
    return batch;
}

}  // namespace koopagru
