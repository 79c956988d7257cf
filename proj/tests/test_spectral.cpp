#include "koopagru/spectral.hpp"
#include "koopagru/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace koopagru;

namespace {

WindowBatch batch_of(const Eigen::MatrixXd& series, Index window) {
    RawSeries s;
    s.values = series;
    return make_windows(s, window);
}

// Selection with a hand-picked dominant set.
FrequencySelection fixed_selection(Index window, std::vector<Index> bins) {
    FrequencySelection sel;
    sel.window_length = window;
    sel.spectrum_size = window / 2 + 1;
    sel.mean_amplitude = Eigen::VectorXd::Zero(sel.spectrum_size);
    std::sort(bins.begin(), bins.end());
    sel.dominant = std::move(bins);
    return sel;
}

}  // namespace

TEST_CASE("dominant count rounds half up and clamps") {
    CHECK(dominant_count(0.0, 51) == 0);
    CHECK(dominant_count(1.0, 51) == 51);
    CHECK(dominant_count(0.1, 51) == 5);   // 5.1
    CHECK(dominant_count(0.5, 51) == 26);  // 25.5 rounds up
    CHECK(dominant_count(0.3, 5) == 2);    // 1.5 rounds up
    CHECK_THROWS_AS(dominant_count(-0.1, 51), SpectralError);
    CHECK_THROWS_AS(dominant_count(1.5, 51), SpectralError);
}

TEST_CASE("ranking breaks ties toward the lower bin") {
    Eigen::VectorXd amp(6);
    amp << 1.0, 3.0, 2.0, 3.0, 0.5, 2.0;
    CHECK(rank_bins(amp) == std::vector<Index>{1, 3, 2, 5, 0, 4});
    const auto sel = select_dominant(amp, 10, 0.5);  // round(3) bins
    CHECK(sel.dominant == std::vector<Index>{1, 2, 3});
    CHECK(sel.is_dominant(2));
    CHECK_FALSE(sel.is_dominant(5));
}

TEST_CASE("single tone selects its own bin") {
    const auto series = synth::gen_sine_mixture({{5.0, 1.0, 0.3}}, 100, 4, 2, 0.01, 9);
    const auto sel = fit_dominant_spectrum(batch_of(series.values, 100), 0.01);  // round(0.51) = 1
    CHECK(sel.spectrum_size == 51);
    CHECK(sel.dominant == std::vector<Index>{5});
}

TEST_CASE("alpha limits") {
    const auto series = synth::gen_sine_mixture({{3.0, 1.0, 0.0}}, 100, 3, 2, 0.1, 1);
    const auto batch = batch_of(series.values, 100);
    CHECK(fit_dominant_spectrum(batch, 0.0).dominant.empty());
    const auto all = fit_dominant_spectrum(batch, 1.0);
    CHECK(all.dominant.size() == 51);
    CHECK(all.dominant.front() == 0);
    CHECK(all.dominant.back() == 50);
    CHECK_THROWS_AS(fit_dominant_spectrum(WindowBatch{}, 0.1), SpectralError);
}

TEST_CASE("mean amplitude matches a direct DFT over windows and channels") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd series = testing::random_matrix(64, 3, rng);
    const auto batch = batch_of(series, 16);
    const Eigen::VectorXd amp = mean_amplitude_spectrum(batch);
    REQUIRE(amp.size() == 9);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(9);
    for (const auto& w : batch.windows) {
        for (Index c = 0; c < 3; ++c) {
            const auto spec = testing::naive_dft(w.col(c));
            for (Index k = 0; k < 9; ++k) expected(k) += std::abs(spec[static_cast<std::size_t>(k)]);
        }
    }
    expected /= 12.0;
    CHECK((amp - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("empty and full filters") {
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd w = testing::random_matrix(100, 3, rng);
    const auto none = split_invariant_variant(w, fixed_selection(100, {}));
    CHECK(none.invariant.isZero(0.0));
    CHECK(none.variant == w);

    std::vector<Index> every(51);
    std::iota(every.begin(), every.end(), Index{0});
    const auto full = split_invariant_variant(w, fixed_selection(100, every));
    CHECK((full.invariant - w).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(full.variant.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("band-pass agrees with the naive DFT oracle") {
    std::mt19937_64 rng(6);
    for (Index length : {16, 17, 100}) {
        const Eigen::MatrixXd w = testing::random_matrix(length, 2, rng);
        const std::vector<Index> bins{0, 3, length / 2};
        const auto split = split_invariant_variant(w, fixed_selection(length, bins));
        for (Index c = 0; c < 2; ++c) {
            const Eigen::VectorXd oracle = testing::naive_bandpass(w.col(c), bins);
            CHECK((split.invariant.col(c) - oracle).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("two-tone window recovers the dominant sinusoid") {
    const auto series = synth::gen_sine_mixture({{5.0, 1.0, 0.4}, {13.0, 0.7, 1.1}}, 100, 1, 1, 0.0);
    const auto split = split_invariant_variant(series.values, fixed_selection(100, {5}));
    double sq = 0.0;
    for (Index t = 0; t < 100; ++t) {
        const double expected = std::sin(2.0 * std::numbers::pi * 5.0 * static_cast<double>(t) / 100.0 + 0.4);
        sq += std::pow(split.invariant(t, 0) - expected, 2);
    }
    CHECK(std::sqrt(sq / 100.0) < 1e-6);
}

TEST_CASE("split properties on random windows") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<Index> bin(0, 50);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Index> bins;
        for (int k = 0; k < 6; ++k) bins.push_back(bin(rng));
        std::sort(bins.begin(), bins.end());
        bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
        const auto sel = fixed_selection(100, bins);
        const Eigen::MatrixXd w1 = testing::random_matrix(100, 4, rng);
        const Eigen::MatrixXd w2 = testing::random_matrix(100, 4, rng);
        const auto s1 = split_invariant_variant(w1, sel);
        const auto s2 = split_invariant_variant(w2, sel);

        CHECK((w1 - (s1.invariant + s1.variant)).cwiseAbs().maxCoeff() < 1e-9);

        const auto again = split_invariant_variant(s1.invariant, sel);
        CHECK((again.invariant - s1.invariant).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(again.variant.cwiseAbs().maxCoeff() < 1e-9);

        const double a = 1.7;
        const double b = -0.3;
        const auto mix = split_invariant_variant(a * w1 + b * w2, sel);
        CHECK((mix.invariant - (a * s1.invariant + b * s2.invariant)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((mix.variant - (a * s1.variant + b * s2.variant)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("dominant sets grow with alpha") {
    std::mt19937_64 rng(8);
    Eigen::VectorXd amp = testing::random_matrix(51, 1, rng).cwiseAbs();
    amp(7) = amp(9);  // a tie
    std::vector<Index> previous;
    for (double alpha = 0.0; alpha <= 1.0 + 1e-12; alpha += 0.05) {
        const auto sel = select_dominant(amp, 100, std::min(alpha, 1.0));
        CHECK(std::includes(sel.dominant.begin(), sel.dominant.end(), previous.begin(), previous.end()));
        previous = sel.dominant;
    }
}

TEST_CASE("length mismatch") {
    CHECK_THROWS_AS(split_invariant_variant(Eigen::MatrixXd::Zero(50, 1), fixed_selection(100, {1})), SpectralError);
}
