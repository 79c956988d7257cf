#pragma once

#include "koopagru/common.hpp"

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testing {

using koopagru::Index;

// Fresh scratch directory under the build tree (or /tmp outside ctest).
inline std::filesystem::path scratch(const std::string& name) {
    const char* root = std::getenv("KOOPAGRU_TEST_TMP");
    std::filesystem::path dir = std::filesystem::path(root ? root : "/tmp/koopagru_tests") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// Textbook O(L^2) DFT of one column.
inline std::vector<std::complex<double>> naive_dft(const Eigen::VectorXd& x) {
    const Index n = x.size();
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (Index t = 0; t < n; ++t) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
            acc += x(t) * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

// Band-pass through the naive DFT: keep bins in `keep` (0..L/2) and their
// mirrors, inverse transform, real part.
inline Eigen::VectorXd naive_bandpass(const Eigen::VectorXd& x, const std::vector<Index>& keep) {
    const Index n = x.size();
    const auto spec = naive_dft(x);
    std::vector<bool> on(static_cast<std::size_t>(n), false);
    for (Index k : keep) {
        on[static_cast<std::size_t>(k)] = true;
        on[static_cast<std::size_t>((n - k) % n)] = true;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Index t = 0; t < n; ++t) {
        std::complex<double> acc = 0.0;
        for (Index k = 0; k < n; ++k) {
            if (!on[static_cast<std::size_t>(k)]) continue;
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
            acc += spec[static_cast<std::size_t>(k)] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out(t) = acc.real() / static_cast<double>(n);
    }
    return out;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace testing
