#include "koopagru/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace koopagru {

bool FrequencySelection::is_dominant(Index bin) const {
    return std::binary_search(dominant.begin(), dominant.end(), bin);
}

Index dominant_count(double alpha, Index spectrum_size) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw SpectralError("alpha must be in [0, 1]");
    const auto count = static_cast<Index>(std::floor(alpha * static_cast<double>(spectrum_size) + 0.5));
    return std::clamp<Index>(count, 0, spectrum_size);
}

std::vector<Index> rank_bins(const Eigen::VectorXd& amplitude) {
    std::vector<Index> order(static_cast<std::size_t>(amplitude.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return amplitude(a) > amplitude(b); });
    return order;
}

Eigen::VectorXd mean_amplitude_spectrum(const WindowBatch& windows) {
    if (windows.size() == 0) throw SpectralError("cannot fit a spectrum on an empty batch");
    const Index length = windows.window_length();
    const Index bins = length / 2 + 1;

    Eigen::FFT<double> fft;
    std::vector<double> signal(static_cast<std::size_t>(length));
    std::vector<std::complex<double>> spectrum;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(bins);
    Index count = 0;
    for (const auto& window : windows.windows) {
        if (window.rows() != length) throw SpectralError("windows of unequal length");
        for (Index c = 0; c < window.cols(); ++c) {
            for (Index t = 0; t < length; ++t) signal[static_cast<std::size_t>(t)] = window(t, c);
            fft.fwd(spectrum, signal);
            for (Index k = 0; k < bins; ++k) sum(k) += std::abs(spectrum[static_cast<std::size_t>(k)]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

FrequencySelection select_dominant(const Eigen::VectorXd& mean_amplitude, Index window_length, double alpha) {
    FrequencySelection sel;
    sel.window_length = window_length;
    sel.spectrum_size = mean_amplitude.size();
    if (sel.spectrum_size != window_length / 2 + 1) throw SpectralError("amplitude table does not match window length");
    sel.mean_amplitude = mean_amplitude;
    sel.alpha = alpha;
    const auto ranked = rank_bins(mean_amplitude);
    const Index count = dominant_count(alpha, sel.spectrum_size);
    sel.dominant.assign(ranked.begin(), ranked.begin() + count);
    std::sort(sel.dominant.begin(), sel.dominant.end());
    return sel;
}

FrequencySelection fit_dominant_spectrum(const WindowBatch& train_windows, double alpha) {
    dominant_count(alpha, 1);  // validates alpha before the FFT pass
    return select_dominant(mean_amplitude_spectrum(train_windows), train_windows.window_length(), alpha);
}

SpectralSplit split_invariant_variant(const Eigen::MatrixXd& window, const FrequencySelection& selection) {
    const Index length = window.rows();
    if (length != selection.window_length) {
        throw SpectralError("window length " + std::to_string(length) + " does not match selection length " +
                            std::to_string(selection.window_length));
    }

    SpectralSplit out;
    out.invariant = Eigen::MatrixXd::Zero(length, window.cols());
    if (!selection.dominant.empty()) {
        std::vector<bool> keep(static_cast<std::size_t>(length), false);
        for (const Index bin : selection.dominant) {
            keep[static_cast<std::size_t>(bin)] = true;
            keep[static_cast<std::size_t>((length - bin) % length)] = true;
        }
        Eigen::FFT<double> fft;
        std::vector<double> signal(static_cast<std::size_t>(length));
        std::vector<std::complex<double>> spectrum;
        std::vector<std::complex<double>> filtered;
        for (Index c = 0; c < window.cols(); ++c) {
            for (Index t = 0; t < length; ++t) signal[static_cast<std::size_t>(t)] = window(t, c);
            fft.fwd(spectrum, signal);
            for (std::size_t k = 0; k < spectrum.size(); ++k) {
                if (!keep[k]) spectrum[k] = 0.0;
            }
            fft.inv(filtered, spectrum);
            for (Index t = 0; t < length; ++t) out.invariant(t, c) = filtered[static_cast<std::size_t>(t)].real();
        }
    }
    out.variant = window - out.invariant;
    return out;
}

}  // namespace koopagru
