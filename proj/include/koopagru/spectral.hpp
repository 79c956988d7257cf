#pragma once

#include "koopagru/data_io.hpp"

#include <utility>
#include <vector>

namespace koopagru {

// Dominant frequency bins shared across the training windows. Bins are the
// non-negative frequencies 0..floor(L/2) of a real FFT over the time axis.
struct FrequencySelection {
    Index window_length = 0;
    Index spectrum_size = 0;
    Eigen::VectorXd mean_amplitude;
    std::vector<Index> dominant;  // ascending
    double alpha = 0.0;

    bool is_dominant(Index bin) const;
};

// round-half-up(alpha * size), clamped to [0, size].
Index dominant_count(double alpha, Index spectrum_size);

// Bins ranked by amplitude, largest first; ties go to the lower bin.
std::vector<Index> rank_bins(const Eigen::VectorXd& amplitude);

// Mean |rfft| per bin over every window and channel.
Eigen::VectorXd mean_amplitude_spectrum(const WindowBatch& windows);

FrequencySelection fit_dominant_spectrum(const WindowBatch& train_windows, double alpha);

// Re-selects the top bins of an already fitted amplitude table.
FrequencySelection select_dominant(const Eigen::VectorXd& mean_amplitude, Index window_length, double alpha);

struct SpectralSplit {
    Eigen::MatrixXd invariant;  // inverse FFT of the dominant bins only
    Eigen::MatrixXd variant;    // window - invariant
};

SpectralSplit split_invariant_variant(const Eigen::MatrixXd& window, const FrequencySelection& selection);

}  // namespace koopagru
