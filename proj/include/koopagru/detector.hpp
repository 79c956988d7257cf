#pragma once

#include "koopagru/model.hpp"

#include <span>
#include <vector>

namespace koopagru {

struct ScoreSeries {
    Eigen::VectorXd scores;
    // Index in the source series that each score describes.
    std::vector<Index> index;
};

enum class PercentileRule {
    UpperTail,  // delta = P_(100-r): about r% of calibration points exceed it
    Literal,    // delta = P_r
};

struct Threshold {
    double delta = 0.0;
    double r = 0.0;
    PercentileRule rule = PercentileRule::UpperTail;
};

struct DetectionResult {
    Eigen::VectorXi flags;
    Eigen::VectorXi adjusted_flags;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    Index tp = 0;
    Index fp = 0;
    Index fn = 0;
};

// Linear-interpolation percentile (p in [0, 100]) of a non-empty sample.
double percentile(std::span<const double> values, double p);

Threshold calibrate_threshold(const ScoreSeries& val_scores, double r,
                              PercentileRule rule = PercentileRule::UpperTail);

Eigen::VectorXi flag(const Eigen::VectorXd& scores, const Threshold& threshold);

// Every ground-truth segment containing at least one flag becomes fully flagged.
Eigen::VectorXi point_adjust(const Eigen::VectorXi& flags, const Eigen::VectorXi& labels);

// Pointwise confusion counts and P/R/F1 (0 on zero denominators). Only
// `flags` is filled in the returned result besides the metrics.
DetectionResult compute_metrics(const Eigen::VectorXi& flags, const Eigen::VectorXi& labels);

struct Detection {
    Threshold threshold;
    DetectionResult raw;
    DetectionResult adjusted;  // metrics on point-adjusted flags
};

Detection detect(const ScoreSeries& test_scores, const Eigen::VectorXi& labels, const Threshold& threshold);

// Validation errors: L-1 per window, concatenated, no boundary fill.
template <typename Scalar>
ScoreSeries evaluate_val_errors(const ModelState<Scalar>& state, const WindowBatch& val_windows,
                                Index chunk = 128) {
    ScoreSeries out;
    const auto prepared = prepare_windows<Scalar>(state.config, state.selection, val_windows);
    const Index steps = state.config.window - 1;
    out.scores.resize(static_cast<Index>(prepared.size()) * steps);
    Index pos = 0;
    for (std::size_t begin = 0; begin < prepared.size(); begin += static_cast<std::size_t>(chunk)) {
        const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(chunk), prepared.size() - begin);
        const auto errors = prediction_errors(state, std::span(prepared).subspan(begin, count));
        for (std::size_t b = 0; b < count; ++b) {
            const Index origin = val_windows.origins[begin + b];
            for (Index t = 0; t < steps; ++t) {
                out.scores(pos++) = errors[b](t);
                out.index.push_back(origin + t + 1);
            }
        }
    }
    return out;
}

// Scores for every windowed test point. The error predicting step t+1 is
// assigned to t+1; each window's first index repeats its first score.
template <typename Scalar>
ScoreSeries score_test(const ModelState<Scalar>& state, const WindowBatch& test_windows, Index chunk = 128) {
    ScoreSeries out;
    const auto prepared = prepare_windows<Scalar>(state.config, state.selection, test_windows);
    const Index length = state.config.window;
    out.scores.resize(static_cast<Index>(prepared.size()) * length);
    Index pos = 0;
    for (std::size_t begin = 0; begin < prepared.size(); begin += static_cast<std::size_t>(chunk)) {
        const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(chunk), prepared.size() - begin);
        const auto errors = prediction_errors(state, std::span(prepared).subspan(begin, count));
        for (std::size_t b = 0; b < count; ++b) {
            const Index origin = test_windows.origins[begin + b];
            out.scores(pos++) = errors[b](0);
            out.index.push_back(origin);
            for (Index t = 0; t + 1 < length; ++t) {
                out.scores(pos++) = errors[b](t);
                out.index.push_back(origin + t + 1);
            }
        }
    }
    return out;
}

// Labels aligned with a windowed score series.
Eigen::VectorXi windowed_labels(const WindowBatch& windows);

}  // namespace koopagru
