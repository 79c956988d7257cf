#include "koopagru/synth.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <algorithm>
#include <random>

namespace koopagru::synth {

RawSeries gen_linear_system(const LinearSystemSpec& spec) {
    const Index m = spec.A.rows();
    if (spec.A.cols() != m || spec.x0.size() != m) throw SpecError("A must be square and match x0");
    if (spec.steps <= 0) throw SpecError("steps must be positive");
    if (spec.noise_std < 0.0) throw SpecError("noise_std must be non-negative");
    const double radius = spec.A.eigenvalues().cwiseAbs().maxCoeff();
    if (radius > kMaxSpectralRadius) {
        throw UnstableSystemError("spectral radius " + std::to_string(radius) + " exceeds " +
                                  std::to_string(kMaxSpectralRadius));
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    RawSeries series;
    series.values.resize(spec.steps, m);
    series.values.row(0) = spec.x0.transpose();
    for (Index k = 1; k < spec.steps; ++k) {
        Eigen::VectorXd next = spec.A * series.values.row(k - 1).transpose();
        if (spec.noise_std > 0.0) {
            for (Index i = 0; i < m; ++i) next(i) += spec.noise_std * noise(rng);
        }
        series.values.row(k) = next.transpose();
    }
    series.labels = Eigen::VectorXi::Zero(spec.steps);
    return series;
}

RawSeries gen_sine_mixture(const std::vector<Tone>& tones, Index window, Index n_windows, Index channels,
                           double noise_std, std::uint64_t seed) {
    if (window <= 0 || n_windows <= 0 || channels <= 0) throw SpecError("window, n_windows and channels must be positive");
    for (const auto& tone : tones) {
        if (tone.cycles_per_window < 0.0 || 2.0 * tone.cycles_per_window >= static_cast<double>(window)) {
            throw SpecError("tone at " + std::to_string(tone.cycles_per_window) +
                            " cycles/window is outside [0, Nyquist)");
        }
    }
    const Index total = window * n_windows;
    Eigen::VectorXd clean = Eigen::VectorXd::Zero(total);
    for (Index t = 0; t < total; ++t) {
        for (const auto& tone : tones) {
            clean(t) += tone.amplitude * std::sin(2.0 * std::numbers::pi * tone.cycles_per_window *
                                                      static_cast<double>(t) / static_cast<double>(window) +
                                                  tone.phase);
        }
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    RawSeries series;
    series.values = clean.replicate(1, channels);
    if (noise_std > 0.0) {
        for (Index t = 0; t < total; ++t) {
            for (Index c = 0; c < channels; ++c) series.values(t, c) += noise_std * noise(rng);
        }
    }
    series.labels = Eigen::VectorXi::Zero(total);
    return series;
}

RawSeries inject_anomalies(const RawSeries& series, const AnomalySpec& spec) {
    if (spec.width <= 0) throw SpecError("anomaly width must be positive");
    if (spec.channel >= series.channels()) throw SpecError("anomaly channel out of range");
    const Index total = series.length();
    for (const Index pos : spec.positions) {
        if (pos < 0 || pos >= total) throw SpecError("anomaly position " + std::to_string(pos) + " out of range");
    }

    RawSeries out = series;
    if (!out.labels) out.labels = Eigen::VectorXi::Zero(total);
    const Index c0 = spec.channel < 0 ? 0 : spec.channel;
    const Index nc = spec.channel < 0 ? series.channels() : 1;

    for (const Index pos : spec.positions) {
        Index end = std::min(total, pos + spec.width);
        if (spec.kind == AnomalyKind::LevelShift) end = total;
        for (Index t = pos; t < end; ++t) {
            auto row = out.values.row(t).segment(c0, nc);
            switch (spec.kind) {
                case AnomalyKind::Spike:
                case AnomalyKind::LevelShift:
                    row.array() += spec.magnitude;
                    break;
                case AnomalyKind::FreqShift:
                    row.setConstant(spec.magnitude *
                                    std::sin(2.0 * std::numbers::pi * spec.frequency * static_cast<double>(t - pos)));
                    break;
            }
            (*out.labels)(t) = 1;
        }
    }
    return out;
}

}  // namespace koopagru::synth

namespace koopagru::synth {

Fixture make_spike_fixture(const SpikeFixtureSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) throw SpecError("test_fraction must be in (0, 1)");
    const RawSeries all = gen_sine_mixture(spec.tones, spec.window, spec.n_windows, spec.channels, spec.noise_std, spec.seed);
    const auto test_windows = static_cast<Index>(std::llround(spec.test_fraction * static_cast<double>(spec.n_windows)));
    const Index train_len = (spec.n_windows - test_windows) * spec.window;
    if (spec.n_spikes > test_windows) throw SpecError("more spikes than test windows");
    if (spec.width + 2 > spec.window) throw SpecError("spike width does not fit in a window");

    Fixture f;
    f.train.values = all.values.topRows(train_len);
    f.train.labels = Eigen::VectorXi::Zero(train_len);
    RawSeries test;
    test.values = all.values.bottomRows(all.length() - train_len);
    test.labels = Eigen::VectorXi::Zero(test.length());

    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Index> slots(static_cast<std::size_t>(test_windows));
    for (Index i = 0; i < test_windows; ++i) slots[static_cast<std::size_t>(i)] = i;
    std::shuffle(slots.begin(), slots.end(), rng);
    // Offsets start at 2 so a spike never lands on the boundary-filled first score.
    std::uniform_int_distribution<Index> offset(2, spec.window - spec.width - 1);
    for (Index k = 0; k < spec.n_spikes; ++k) {
        f.anomaly_positions.push_back(slots[static_cast<std::size_t>(k)] * spec.window + offset(rng));
    }
    std::sort(f.anomaly_positions.begin(), f.anomaly_positions.end());

    AnomalySpec anomalies;
    anomalies.kind = spec.kind;
    anomalies.positions = f.anomaly_positions;
    anomalies.magnitude = spec.magnitude;
    anomalies.width = spec.width;
    f.test = inject_anomalies(test, anomalies);
    return f;
}

}  // namespace koopagru::synth
