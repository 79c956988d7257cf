#pragma once

#include "koopagru/data_io.hpp"

#include <cstdint>
#include <vector>

namespace koopagru::synth {

inline constexpr double kMaxSpectralRadius = 1.05;

// x_{k+1} = A x_k + N(0, noise_std^2); `steps` rows including x0.
struct LinearSystemSpec {
    Eigen::MatrixXd A;
    Eigen::VectorXd x0;
    Index steps = 0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

RawSeries gen_linear_system(const LinearSystemSpec& spec);

struct Tone {
    double cycles_per_window = 0.0;
    double amplitude = 1.0;
    double phase = 0.0;
};

// Every channel is sum_k a_k sin(2*pi*f_k*t/L + phi_k) plus independent noise.
RawSeries gen_sine_mixture(const std::vector<Tone>& tones, Index window, Index n_windows, Index channels,
                           double noise_std, std::uint64_t seed = 0);

enum class AnomalyKind { Spike, LevelShift, FreqShift };

struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::Spike;
    std::vector<Index> positions;
    double magnitude = 0.0;
    Index width = 1;
    // FreqShift only: replacement tone in cycles per sample.
    double frequency = 0.1;
    // Channel to perturb; -1 perturbs every channel.
    Index channel = -1;
};

RawSeries inject_anomalies(const RawSeries& series, const AnomalySpec& spec);

}  // namespace koopagru::synth

namespace koopagru::synth {

// Sine-mixture series split into a clean training part and a test part with
// spikes placed in distinct windows.
struct SpikeFixtureSpec {
    std::vector<Tone> tones{{4.0, 1.0, 0.0}, {11.0, 0.5, 0.8}};
    Index window = 100;
    Index n_windows = 200;
    Index channels = 3;
    double noise_std = 0.2;
    double test_fraction = 0.2;
    Index n_spikes = 10;
    double magnitude = 1.5;
    Index width = 1;
    AnomalyKind kind = AnomalyKind::Spike;
    std::uint64_t seed = 0;
};

struct Fixture {
    RawSeries train;
    RawSeries test;
    std::vector<Index> anomaly_positions;  // indices into test
};

Fixture make_spike_fixture(const SpikeFixtureSpec& spec);

}  // namespace koopagru::synth
