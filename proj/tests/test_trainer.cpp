#include "koopagru/detector.hpp"
#include "koopagru/synth.hpp"
#include "koopagru/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace koopagru;
using Md = Eigen::MatrixXd;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.m = 2;
    c.q = 4;
    c.window = 20;
    c.hidden1 = 8;
    c.hidden2 = 8;
    c.invariant_hidden = 8;
    c.gru_layers_variant = 1;
    c.gru_layers_invariant = 1;
    c.alpha = 0.2;
    c.beta = 0.3;
    c.lambda_reg = 1e-3;
    return c;
}

RawSeries slice(const RawSeries& s, Index begin, Index count) {
    RawSeries out;
    out.values = s.values.middleRows(begin, count);
    return out;
}

// Damped rotation with a little process noise: 20 training and 10
// validation windows of length 20.
DatasetSplit linear_split() {
    const double a = 0.98 * std::cos(0.3);
    const double b = 0.98 * std::sin(0.3);
    synth::LinearSystemSpec spec;
    spec.A.resize(2, 2);
    spec.A << a, -b, b, a;
    spec.x0 = Eigen::Vector2d(3.0, 0.0);
    spec.steps = 600;
    spec.noise_std = 0.3;
    spec.seed = 4;
    const auto s = synth::gen_linear_system(spec);
    DatasetSplit split;
    split.train = slice(s, 0, 400);
    split.val = slice(s, 400, 200);
    return split;
}

ModelState<double> initial_state(const ModelConfig& cfg, const DatasetSplit& split) {
    return init_model<double>(cfg, fit_dominant_spectrum(make_windows(split.train, cfg.window), cfg.alpha), 3);
}

TrainConfig small_train(Index epochs) {
    TrainConfig t;
    t.max_epochs = epochs;
    t.batch_size = 4;
    t.micro_batch = 4;
    t.seed = 7;
    return t;
}

bool same_params(const ModelParameters<double>& a, const ModelParameters<double>& b, double tol) {
    std::vector<const Md*> rhs;
    b.for_each([&](const std::string&, const Md& p) { rhs.push_back(&p); });
    std::size_t i = 0;
    bool same = true;
    a.for_each([&](const std::string&, const Md& p) {
        if ((p - *rhs[i++]).cwiseAbs().maxCoeff() > tol) same = false;
    });
    return same;
}

}  // namespace

TEST_CASE("zero epochs return the initial state") {
    const auto split = linear_split();
    const auto state = initial_state(small_config(), split);
    const auto result = train(state, split, small_train(0));
    CHECK(same_params(result.state.params, state.params, 0.0));
    CHECK(result.report.train_loss.empty());
    CHECK(result.report.best_epoch == -1);
}

TEST_CASE("first Adam step moves every parameter with a gradient by about the learning rate") {
    const auto split = linear_split();
    auto state = initial_state(small_config(), split);
    const auto windows = prepare_windows<double>(state.config, state.selection, make_windows(split.train, 20));
    auto grad = state.params.zeros_like();
    loss_and_gradient<double>(state, windows, grad);
    const auto before = state.params;
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    Adam<double> adam(state.params, cfg);
    adam.step(state.params, grad);

    std::vector<const Md*> g;
    grad.for_each([&](const std::string&, const Md& x) { g.push_back(&x); });
    std::vector<const Md*> old;
    before.for_each([&](const std::string&, const Md& x) { old.push_back(&x); });
    std::size_t i = 0;
    state.params.for_each([&](const std::string& name, const Md& p) {
        const Md& gi = *g[i];
        const Md step = p - *old[i++];
        for (Index k = 0; k < p.size(); ++k) {
            const double gk = gi.data()[k];
            if (std::abs(gk) < 1e-5) continue;  // epsilon dominates
            INFO(name);
            CHECK(step.data()[k] == doctest::Approx(-1e-3 * (gk > 0 ? 1.0 : -1.0)).epsilon(1e-2));
        }
    });
}

TEST_CASE("training loss drops on a linear system") {
    const auto split = linear_split();
    const auto result = train(initial_state(small_config(), split), split, small_train(6));
    REQUIRE(result.report.train_loss.size() >= 6);
    CHECK(result.report.train_loss[5] < result.report.train_loss[0]);
    CHECK(result.report.val_loss.size() == result.report.train_loss.size());
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto split = linear_split();
    const auto state = initial_state(small_config(), split);
    const auto a = train(state, split, small_train(3));
    const auto b = train(state, split, small_train(3));
    CHECK(a.report.train_loss == b.report.train_loss);
    CHECK(same_params(a.state.params, b.state.params, 0.0));

    auto other = small_train(3);
    other.seed = 8;
    CHECK(train(state, split, other).report.train_loss != a.report.train_loss);
}

TEST_CASE("micro-batching leaves the gradient unchanged") {
    auto cfg = small_config();
    cfg.dropout = 0.0;
    const auto split = linear_split();
    const auto state = initial_state(cfg, split);
    auto whole = small_train(2);
    auto pieces = whole;
    pieces.micro_batch = 1;
    const auto a = train(state, split, whole);
    const auto b = train(state, split, pieces);
    CHECK(same_params(a.state.params, b.state.params, 1e-9));
}

TEST_CASE("returned state is the best validation epoch") {
    const auto split = linear_split();
    auto tc = small_train(8);
    tc.learning_rate = 0.05;
    const auto result = train(initial_state(small_config(), split), split, tc);
    const auto& r = result.report;
    const auto best = std::min_element(r.val_loss.begin(), r.val_loss.end());
    CHECK(r.best_epoch == std::distance(r.val_loss.begin(), best));
    CHECK(r.best_val_loss == *best);
    const auto val = prepare_windows<double>(result.state.config, result.state.selection, make_windows(split.val, 20));
    CHECK(mean_loss(result.state, val, tc.micro_batch).total == doctest::Approx(r.best_val_loss).epsilon(1e-12));
}

TEST_CASE("early stopping after patience epochs without improvement") {
    const auto split = linear_split();
    auto tc = small_train(40);
    tc.learning_rate = 1.0;
    tc.patience = 2;
    const auto result = train(initial_state(small_config(), split), split, tc);
    const auto& r = result.report;
    CHECK(r.stopped_early);
    CHECK(static_cast<Index>(r.val_loss.size()) == r.best_epoch + tc.patience + 1);
    for (std::size_t e = static_cast<std::size_t>(r.best_epoch) + 1; e < r.val_loss.size(); ++e) {
        CHECK(r.val_loss[e] >= r.best_val_loss);
    }
}

TEST_CASE("short partitions and bad settings") {
    auto split = linear_split();
    const auto state = initial_state(small_config(), split);
    auto short_val = split;
    short_val.val = slice(split.val, 0, 19);
    CHECK_THROWS_AS(train(state, short_val, small_train(1)), TrainError);
    auto short_train = split;
    short_train.train = slice(split.train, 0, 10);
    CHECK_THROWS_AS(train(state, short_train, small_train(1)), TrainError);
    auto bad = small_train(1);
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train(state, split, bad), ConfigError);
}

TEST_CASE("validation errors cover L-1 steps per window") {
    const auto split = linear_split();
    const auto state = initial_state(small_config(), split);
    const auto windows = make_windows(split.val, 20);
    const auto errors = evaluate_val_errors(state, windows, 3);
    CHECK(errors.scores.size() == windows.size() * 19);
    CHECK(errors.index.front() == 1);
    CHECK(errors.index[19] == 21);
    CHECK((errors.scores.array() >= 0.0).all());
    // Chunking only changes floating-point summation order.
    CHECK((evaluate_val_errors(state, windows, 128).scores - errors.scores).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("persistence model scores a constant series at zero") {
    auto cfg = small_config();
    cfg.alpha = 0.0;  // otherwise the DC bin moves the whole series to the invariant side
    cfg.beta = 0.0;
    RawSeries constant;
    constant.values = Md::Constant(60, 2, 2.5);
    auto state = init_model<double>(cfg, fit_dominant_spectrum(make_windows(constant, 20), cfg.alpha), 1);
    state.params.variant = EncoderParams<double>(cfg.variant_encoder());
    state.params.k_var = Md::Identity(6, 6);
    const auto errors = evaluate_val_errors(state, make_windows(constant, 20));
    CHECK(errors.scores.cwiseAbs().maxCoeff() < 1e-10);
}
