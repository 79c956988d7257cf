#pragma once

#include "koopagru/common.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace koopagru {

inline constexpr double kStdEpsilon = 1e-8;

// A multichannel series, time along rows. Labels (1 = anomaly) are optional.
struct RawSeries {
    Eigen::MatrixXd values;                 // T x m
    std::vector<std::string> channel_names;
    std::optional<Eigen::VectorXi> labels;  // length T

    Index length() const { return values.rows(); }
    Index channels() const { return values.cols(); }
};

struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // clamped to kStdEpsilon

    static Standardization fit(const Eigen::MatrixXd& values);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;
};

struct DatasetSplit {
    RawSeries train;
    RawSeries val;
    RawSeries test;
    Standardization standardization;
};

enum class DataFormat { Csv, NpyDirectory };

DataFormat parse_data_format(const std::string& name);
std::string to_string(DataFormat format);

struct DatasetSpec {
    std::string path;
    DataFormat format = DataFormat::Csv;
    Index dims = 0;
    // Fraction of the training partition held out for validation when the
    // source ships no validation file.
    double val_fraction = 0.2;
    // Only used for a single CSV file: leading fraction that is train (+val).
    double train_fraction = 0.5;
    bool impute = false;
};

// Non-overlapping windows; windows[b] is L x m and starts at origins[b].
struct WindowBatch {
    std::vector<Eigen::MatrixXd> windows;
    std::vector<Index> origins;
    std::vector<Eigen::VectorXi> labels;  // empty when the series has none

    Index size() const { return static_cast<Index>(windows.size()); }
    Index window_length() const { return windows.empty() ? 0 : windows.front().rows(); }
    bool has_labels() const { return !labels.empty(); }
};

DatasetSplit load_dataset(const DatasetSpec& spec);

// Reads one CSV file. A non-numeric first row is taken as a header; a column
// named "label" or "anomaly" becomes the label vector.
RawSeries read_csv(const std::string& path);
void write_csv(const std::string& path, const RawSeries& series);

WindowBatch make_windows(const RawSeries& series, Index window);

// Rows 0..L-2 and 1..L-1 of a window: present and one-step-ahead snapshots.
template <typename Derived>
std::pair<Matrix<typename Derived::Scalar>, Matrix<typename Derived::Scalar>>
shift_pair(const Eigen::MatrixBase<Derived>& window) {
    const Index rows = window.rows();
    if (rows < 2) {
        throw WindowingError("shift_pair needs at least 2 rows, got " + std::to_string(rows));
    }
    return {window.topRows(rows - 1), window.bottomRows(rows - 1)};
}

}  // namespace koopagru
