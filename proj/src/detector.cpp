#include "koopagru/detector.hpp"

#include <algorithm>
#include <cmath>

namespace koopagru {

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw CalibrationError("percentile of an empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Threshold calibrate_threshold(const ScoreSeries& val_scores, double r, PercentileRule rule) {
    if (val_scores.scores.size() == 0) throw CalibrationError("no validation scores to calibrate on");
    if (!(r > 0.0 && r < 100.0)) throw CalibrationError("anomaly ratio r must be in (0, 100)");
    const std::span<const double> values(val_scores.scores.data(), static_cast<std::size_t>(val_scores.scores.size()));
    const double p = rule == PercentileRule::UpperTail ? 100.0 - r : r;
    return {percentile(values, p), r, rule};
}

Eigen::VectorXi flag(const Eigen::VectorXd& scores, const Threshold& threshold) {
    return (scores.array() > threshold.delta).cast<int>();
}

Eigen::VectorXi point_adjust(const Eigen::VectorXi& flags, const Eigen::VectorXi& labels) {
    if (flags.size() != labels.size()) throw ShapeError("point_adjust: flags and labels differ in length");
    Eigen::VectorXi out = flags;
    const Index n = labels.size();
    Index t = 0;
    while (t < n) {
        if (labels(t) == 0) {
            ++t;
            continue;
        }
        Index end = t;
        while (end < n && labels(end) != 0) ++end;
        if (flags.segment(t, end - t).any()) out.segment(t, end - t).setOnes();
        t = end;
    }
    return out;
}

DetectionResult compute_metrics(const Eigen::VectorXi& flags, const Eigen::VectorXi& labels) {
    if (flags.size() != labels.size()) throw ShapeError("compute_metrics: flags and labels differ in length");
    DetectionResult r;
    r.flags = flags;
    for (Index t = 0; t < flags.size(); ++t) {
        const bool f = flags(t) != 0;
        const bool l = labels(t) != 0;
        r.tp += f && l;
        r.fp += f && !l;
        r.fn += !f && l;
    }
    r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

Detection detect(const ScoreSeries& test_scores, const Eigen::VectorXi& labels, const Threshold& threshold) {
    Detection d;
    d.threshold = threshold;
    const Eigen::VectorXi flags = flag(test_scores.scores, threshold);
    d.raw = compute_metrics(flags, labels);
    d.raw.adjusted_flags = point_adjust(flags, labels);
    d.adjusted = compute_metrics(d.raw.adjusted_flags, labels);
    d.adjusted.flags = flags;
    d.adjusted.adjusted_flags = d.raw.adjusted_flags;
    return d;
}

Eigen::VectorXi windowed_labels(const WindowBatch& windows) {
    if (!windows.has_labels()) throw ShapeError("windows carry no labels");
    const Index length = windows.window_length();
    Eigen::VectorXi out(windows.size() * length);
    for (Index b = 0; b < windows.size(); ++b) out.segment(b * length, length) = windows.labels[static_cast<std::size_t>(b)];
    return out;
}

}  // namespace koopagru
