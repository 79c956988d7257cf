#pragma once

#include "koopagru/data_io.hpp"
#include "koopagru/encoders.hpp"
#include "koopagru/koopman.hpp"
#include "koopagru/spectral.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace koopagru {

inline constexpr double kNormEpsilon = 1e-5;

struct NormFlags {
    bool var_norm = true;
    bool var_denorm = true;
    bool inv_norm = true;
    bool inv_denorm = false;

    bool operator==(const NormFlags&) const = default;
};

struct ModelConfig {
    double alpha = 0.1;
    double beta = 0.1;
    double lambda_reg = 1e-3;
    Index window = 100;
    Index m = 0;  // channels; taken from the data when 0
    Index q = 128;
    Index hidden1 = 100;
    Index hidden2 = 128;
    Index invariant_hidden = 128;
    Index gru_layers_variant = 1;
    Index gru_layers_invariant = 1;
    double dropout = 0.01;
    NormFlags norm_flags;
    // Squared Frobenius residual (the DeepDMD cost) instead of the plain norm.
    bool squared_loss = false;

    Index observable_width() const { return m + q; }

    EncoderConfig variant_encoder() const {
        return {m, hidden1, hidden2, q, gru_layers_variant, dropout, 0};
    }
    EncoderConfig invariant_encoder() const {
        return {m, hidden1, hidden2, invariant_hidden, gru_layers_invariant, dropout, m};
    }

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
        if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
        if (!(lambda_reg >= 0.0)) throw ConfigError("lambda must be >= 0");
        if (window < 2) throw ConfigError("window must be >= 2");
        if (m < 1) throw ConfigError("channel count m must be >= 1");
        if (q < 1) throw ConfigError("q must be >= 1");
        if (norm_flags.var_denorm && !norm_flags.var_norm) throw ConfigError("var_denorm requires var_norm");
        if (norm_flags.inv_denorm && !norm_flags.inv_norm) throw ConfigError("inv_denorm requires inv_norm");
        variant_encoder().validate();
        invariant_encoder().validate();
    }

    Index parameter_count() const {
        return variant_encoder().parameter_count() + invariant_encoder().parameter_count() +
               observable_width() * observable_width() + m * m;
    }
};

template <typename Scalar>
struct NormStats {
    Matrix<Scalar> mu;     // 1 x m
    Matrix<Scalar> sigma;  // 1 x m, >= kNormEpsilon

    static NormStats identity(Index m) { return {Matrix<Scalar>::Zero(1, m), Matrix<Scalar>::Ones(1, m)}; }
};

// Per-channel centering and scaling over the time axis of one window.
template <typename Scalar>
std::pair<Matrix<Scalar>, NormStats<Scalar>> instance_normalize(const Matrix<Scalar>& x) {
    if (!x.allFinite()) throw NumericalError("instance_normalize: non-finite input");
    NormStats<Scalar> stats;
    stats.mu = x.colwise().mean();
    stats.sigma.resize(1, x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
        if (x.rows() > 0 && x.col(c).maxCoeff() == x.col(c).minCoeff()) {
            stats.mu(0, c) = x(0, c);
            stats.sigma(0, c) = static_cast<Scalar>(kNormEpsilon);
            continue;
        }
        const Scalar var = (x.col(c).array() - stats.mu(0, c)).square().mean();
        stats.sigma(0, c) = std::max(std::sqrt(var), static_cast<Scalar>(kNormEpsilon));
    }
    Matrix<Scalar> out = (x.rowwise() - stats.mu.row(0)).array().rowwise() / stats.sigma.row(0).array();
    return {std::move(out), std::move(stats)};
}

template <typename Scalar>
Matrix<Scalar> denormalize(const Matrix<Scalar>& x, const NormStats<Scalar>& stats) {
    return (x.array().rowwise() * stats.sigma.row(0).array()).rowwise() + stats.mu.row(0).array();
}

template <typename Scalar>
Matrix<Scalar> zero_pad_invariant(const Matrix<Scalar>& v, Index width) {
    if (width < v.cols()) {
        throw ShapeError("cannot pad width " + std::to_string(v.cols()) + " to " + std::to_string(width));
    }
    Matrix<Scalar> out = Matrix<Scalar>::Zero(v.rows(), width);
    out.leftCols(v.cols()) = v;
    return out;
}

template <typename Scalar>
struct ModelParameters {
    EncoderParams<Scalar> variant;
    EncoderParams<Scalar> invariant;
    Matrix<Scalar> k_var;  // (m+q) x (m+q)
    Matrix<Scalar> k_inv;  // m x m

    template <typename F>
    void for_each(F&& f) {
        variant.for_each("variant", f);
        invariant.for_each("invariant", f);
        f("k_var", k_var);
        f("k_inv", k_inv);
    }
    template <typename F>
    void for_each(F&& f) const {
        variant.for_each("variant", f);
        invariant.for_each("invariant", f);
        f("k_var", k_var);
        f("k_inv", k_inv);
    }

    ModelParameters zeros_like() const {
        ModelParameters z = *this;
        z.for_each([](const std::string&, Matrix<Scalar>& p) { p.setZero(); });
        return z;
    }

    Index parameter_count() const {
        Index count = 0;
        for_each([&](const std::string&, const Matrix<Scalar>& p) { count += p.size(); });
        return count;
    }
};

template <typename Scalar>
struct ModelState {
    ModelParameters<Scalar> params;
    FrequencySelection selection;
    ModelConfig config;
};

template <typename Scalar>
ModelState<Scalar> init_model(const ModelConfig& config, FrequencySelection selection, std::uint64_t seed) {
    config.validate();
    if (selection.window_length != config.window) throw ConfigError("frequency selection was fitted on another window length");
    std::mt19937_64 rng(seed);
    ModelState<Scalar> state;
    state.config = config;
    state.selection = std::move(selection);
    state.params.variant = init_encoder<Scalar>(config.variant_encoder(), rng);
    state.params.invariant = init_encoder<Scalar>(config.invariant_encoder(), rng);
    state.params.k_var = init_operator<Scalar>(config.observable_width(), rng);
    state.params.k_inv = init_operator<Scalar>(config.m, rng);
    return state;
}

// Data-only preprocessing of one window: spectral split, shift, instance
// normalization. Computed once per window and reused every epoch.
template <typename Scalar>
struct PreparedWindow {
    Matrix<Scalar> var_in;  // n x m, normalized t-side variant component
    NormStats<Scalar> var_stats;
    Matrix<Scalar> inv_in;  // n x m, normalized t-side invariant component
    NormStats<Scalar> inv_stats;
    Matrix<Scalar> next;    // n x m, raw t+1 slice
};

template <typename Scalar>
PreparedWindow<Scalar> prepare_window(const ModelConfig& config, const FrequencySelection& selection,
                                      const Eigen::MatrixXd& window) {
    if (window.rows() != config.window || window.cols() != config.m) {
        throw ShapeError("window is " + std::to_string(window.rows()) + "x" + std::to_string(window.cols()) +
                         ", model expects " + std::to_string(config.window) + "x" + std::to_string(config.m));
    }
    const auto split = split_invariant_variant(window, selection);
    PreparedWindow<Scalar> p;
    auto branch = [](const Eigen::MatrixXd& component, bool normalize, Matrix<Scalar>& in, NormStats<Scalar>& stats) {
        const Eigen::MatrixXd t_side = shift_pair(component).first;
        if (normalize) {
            auto [normed, s] = instance_normalize<double>(t_side);
            in = normed.cast<Scalar>();
            stats = {s.mu.cast<Scalar>(), s.sigma.cast<Scalar>()};
        } else {
            in = t_side.cast<Scalar>();
            stats = NormStats<Scalar>::identity(t_side.cols());
        }
    };
    branch(split.variant, config.norm_flags.var_norm, p.var_in, p.var_stats);
    branch(split.invariant, config.norm_flags.inv_norm, p.inv_in, p.inv_stats);
    p.next = shift_pair(window).second.cast<Scalar>();
    return p;
}

template <typename Scalar>
std::vector<PreparedWindow<Scalar>> prepare_windows(const ModelConfig& config, const FrequencySelection& selection,
                                                    const WindowBatch& batch) {
    std::vector<PreparedWindow<Scalar>> out;
    out.reserve(batch.windows.size());
    for (const auto& w : batch.windows) out.push_back(prepare_window<Scalar>(config, selection, w));
    return out;
}

// Stacked outputs for a batch of B windows (time-major rows, see encoders.hpp).
template <typename Scalar>
struct ForwardOutput {
    Index batch = 0;
    Matrix<Scalar> phi_pred;       // nB x (m+q)
    Matrix<Scalar> x_next_pred;    // nB x m
    Matrix<Scalar> var_lifted;     // [X̂_var | psi], before the operator
    Matrix<Scalar> inv_input;      // X̂_inv as fed to the invariant encoder
    Matrix<Scalar> inv_padded;     // [K_inv psi_inv | 0], before beta
};

struct LossTerms {
    double total = 0.0;
    double koopman_term = 0.0;
    double reg_term = 0.0;
};

// Rows of window b out of a time-major stacked matrix.
template <typename Scalar>
Matrix<Scalar> window_rows(const Matrix<Scalar>& stacked, Index batch, Index b) {
    const Index steps = stacked.rows() / batch;
    Matrix<Scalar> out(steps, stacked.cols());
    for (Index t = 0; t < steps; ++t) out.row(t) = stacked.row(t * batch + b);
    return out;
}

namespace detail {

template <typename Scalar, typename Member>
Matrix<Scalar> stack(std::span<const PreparedWindow<Scalar>> windows, Member member) {
    const Index batch = static_cast<Index>(windows.size());
    const Matrix<Scalar>& first = windows.front().*member;
    Matrix<Scalar> out(first.rows() * batch, first.cols());
    for (Index b = 0; b < batch; ++b) {
        const Matrix<Scalar>& w = windows[static_cast<std::size_t>(b)].*member;
        for (Index t = 0; t < w.rows(); ++t) out.row(t * batch + b) = w.row(t);
    }
    return out;
}

// Per-window statistics broadcast to every stacked row.
template <typename Scalar, typename Member>
Matrix<Scalar> tile_stats(std::span<const PreparedWindow<Scalar>> windows, Member stats_member, bool sigma,
                          Index steps) {
    const Index batch = static_cast<Index>(windows.size());
    const Index m = windows.front().var_in.cols();
    Matrix<Scalar> per_window(batch, m);
    for (Index b = 0; b < batch; ++b) {
        const auto& s = windows[static_cast<std::size_t>(b)].*stats_member;
        per_window.row(b) = sigma ? s.sigma.row(0) : s.mu.row(0);
    }
    return per_window.replicate(steps, 1);
}

template <typename Scalar>
struct Pass {
    Index batch = 0;
    Index steps = 0;
    Matrix<Scalar> var_in, inv_in, next;
    Matrix<Scalar> var_sigma, var_mu, inv_sigma, inv_mu;
    Matrix<Scalar> psi_var, lifted_var, psi_inv, y_inv;
    Matrix<Scalar> phi_pred;
    EncoderCache<Scalar> cache_var, cache_inv;
    bool invariant_active = false;
};

template <typename Scalar>
Pass<Scalar> run_forward(const ModelState<Scalar>& state, std::span<const PreparedWindow<Scalar>> windows, Mode mode,
                         std::mt19937_64* rng, bool keep_cache) {
    if (windows.empty()) throw ShapeError("forward on an empty batch");
    const auto& cfg = state.config;
    const auto& p = state.params;
    Pass<Scalar> pass;
    pass.batch = static_cast<Index>(windows.size());
    pass.steps = windows.front().var_in.rows();
    for (const auto& w : windows) {
        if (w.var_in.rows() != pass.steps || w.var_in.cols() != cfg.m) throw ShapeError("inconsistent window shapes");
    }
    const Index m = cfg.m;
    const Index width = cfg.observable_width();
    if (p.k_var.rows() != width || p.k_inv.rows() != m) throw ShapeError("operator sizes disagree with config");

    pass.var_in = stack(windows, &PreparedWindow<Scalar>::var_in);
    pass.inv_in = stack(windows, &PreparedWindow<Scalar>::inv_in);
    pass.var_sigma = tile_stats(windows, &PreparedWindow<Scalar>::var_stats, true, pass.steps);
    pass.var_mu = tile_stats(windows, &PreparedWindow<Scalar>::var_stats, false, pass.steps);
    pass.inv_sigma = tile_stats(windows, &PreparedWindow<Scalar>::inv_stats, true, pass.steps);
    pass.inv_mu = tile_stats(windows, &PreparedWindow<Scalar>::inv_stats, false, pass.steps);

    pass.psi_var = encode(p.variant, pass.var_in, pass.batch, mode, rng, keep_cache ? &pass.cache_var : nullptr);
    pass.lifted_var = lift(pass.var_in, pass.psi_var);
    pass.phi_pred = apply_operator(p.k_var, pass.lifted_var);
    if (cfg.norm_flags.var_denorm) {
        auto meas = pass.phi_pred.leftCols(m);
        meas = (meas.array() * pass.var_sigma.array() + pass.var_mu.array()).matrix();
    }

    pass.invariant_active = cfg.beta != 0.0;
    if (pass.invariant_active) {
        pass.psi_inv = encode(p.invariant, pass.inv_in, pass.batch, mode, rng, keep_cache ? &pass.cache_inv : nullptr);
        pass.y_inv = apply_operator(p.k_inv, pass.psi_inv);
        if (cfg.norm_flags.inv_denorm) {
            pass.y_inv = (pass.y_inv.array() * pass.inv_sigma.array() + pass.inv_mu.array()).matrix();
        }
        pass.phi_pred.leftCols(m) += static_cast<Scalar>(cfg.beta) * pass.y_inv;
    } else {
        pass.y_inv = Matrix<Scalar>::Zero(pass.var_in.rows(), m);
    }
    return pass;
}

}  // namespace detail

template <typename Scalar>
ForwardOutput<Scalar> forward(const ModelState<Scalar>& state, std::span<const PreparedWindow<Scalar>> windows) {
    auto pass = detail::run_forward(state, windows, Mode::Eval, nullptr, false);
    ForwardOutput<Scalar> out;
    out.batch = pass.batch;
    out.x_next_pred = pass.phi_pred.leftCols(state.config.m);
    out.phi_pred = std::move(pass.phi_pred);
    out.var_lifted = std::move(pass.lifted_var);
    out.inv_input = std::move(pass.inv_in);
    out.inv_padded = zero_pad_invariant(pass.y_inv, state.config.observable_width());
    return out;
}

// Single window convenience: (phi_pred, x_next_pred), each with L-1 rows.
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> forward(const ModelState<Scalar>& state, const Eigen::MatrixXd& window) {
    const auto prepared = prepare_window<Scalar>(state.config, state.selection, window);
    auto out = forward(state, std::span<const PreparedWindow<Scalar>>(&prepared, 1));
    return {std::move(out.phi_pred), std::move(out.x_next_pred)};
}

// Target observables Psi(X_{t+1}) of the raw t+1 slices (stacked).
template <typename Scalar>
Matrix<Scalar> project_future(const EncoderParams<Scalar>& variant, const Matrix<Scalar>& x_next, Index batch,
                              Mode mode = Mode::Eval, std::mt19937_64* rng = nullptr,
                              EncoderCache<Scalar>* cache = nullptr) {
    return lift(x_next, encode(variant, x_next, batch, mode, rng, cache));
}

template <typename Scalar>
double regularization(const ModelState<Scalar>& state) {
    return static_cast<double>(operator_norms(state.params.k_var, state.params.k_inv));
}

// Adds lambda * d(||K_var||_F + ||K_inv||_F) to `grad`.
template <typename Scalar>
void add_regularization_gradient(const ModelState<Scalar>& state, ModelParameters<Scalar>& grad) {
    const auto lambda = static_cast<Scalar>(state.config.lambda_reg);
    if (lambda == Scalar(0)) return;
    const Scalar nv = state.params.k_var.norm();
    const Scalar ni = state.params.k_inv.norm();
    if (nv > Scalar(0)) grad.k_var += (lambda / nv) * state.params.k_var;
    if (ni > Scalar(0)) grad.k_inv += (lambda / ni) * state.params.k_inv;
}

// Koopman-term contribution of `windows`, each window's residual norm divided
// by `normalizer` (the full batch size), with gradients accumulated into
// `grad` when non-null. The regularization term is not included.
template <typename Scalar>
double accumulate_koopman_term(const ModelState<Scalar>& state, std::span<const PreparedWindow<Scalar>> windows,
                               Index normalizer, Mode mode, std::mt19937_64* rng, ModelParameters<Scalar>* grad) {
    const bool want_grad = grad != nullptr;
    auto pass = detail::run_forward(state, windows, mode, rng, want_grad);
    const auto& cfg = state.config;
    const auto& p = state.params;
    const Index m = cfg.m;
    const Index batch = pass.batch;

    EncoderCache<Scalar> cache_next;
    pass.next = detail::stack(windows, &PreparedWindow<Scalar>::next);
    const Matrix<Scalar> target =
        project_future(p.variant, pass.next, batch, mode, rng, want_grad ? &cache_next : nullptr);

    Matrix<Scalar> residual = target - pass.phi_pred;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_sq = residual.rowwise().squaredNorm();
    Eigen::VectorXd window_sq = Eigen::VectorXd::Zero(batch);
    for (Index i = 0; i < row_sq.size(); ++i) window_sq(i % batch) += static_cast<double>(row_sq(i));

    double term = 0.0;
    Eigen::VectorXd coef(batch);
    for (Index b = 0; b < batch; ++b) {
        const double norm = std::sqrt(window_sq(b));
        if (cfg.squared_loss) {
            term += window_sq(b);
            coef(b) = 2.0 / static_cast<double>(normalizer);
        } else {
            term += norm;
            coef(b) = norm > 0.0 ? 1.0 / (static_cast<double>(normalizer) * norm) : 0.0;
        }
    }
    term /= static_cast<double>(normalizer);
    if (!std::isfinite(term)) throw NumericalError("non-finite Koopman loss term");
    if (!want_grad) return term;

    // dL/dresidual, window-wise scaling.
    const Matrix<Scalar> row_coef = coef.cast<Scalar>().replicate(pass.steps, 1);
    residual = residual.array().colwise() * row_coef.col(0).array();

    // Target side flows into the shared variant encoder.
    const Index q = cfg.q;
    encode_backward(p.variant, cache_next, Matrix<Scalar>(residual.rightCols(q)), grad->variant);

    // phi_pred side: d phi_pred = -d residual.
    Matrix<Scalar> d_phi = -residual;
    Matrix<Scalar> d_yvar = d_phi;
    if (cfg.norm_flags.var_denorm) d_yvar.leftCols(m) = d_yvar.leftCols(m).cwiseProduct(pass.var_sigma);
    grad->k_var.noalias() += d_yvar.transpose() * pass.lifted_var;
    Matrix<Scalar> d_lifted(d_yvar.rows(), d_yvar.cols());
    d_lifted.noalias() = d_yvar * p.k_var;
    encode_backward(p.variant, pass.cache_var, Matrix<Scalar>(d_lifted.rightCols(q)), grad->variant);

    if (pass.invariant_active) {
        Matrix<Scalar> d_yinv = static_cast<Scalar>(cfg.beta) * d_phi.leftCols(m);
        if (cfg.norm_flags.inv_denorm) d_yinv = d_yinv.cwiseProduct(pass.inv_sigma);
        grad->k_inv.noalias() += d_yinv.transpose() * pass.psi_inv;
        Matrix<Scalar> d_psi_inv(d_yinv.rows(), m);
        d_psi_inv.noalias() = d_yinv * p.k_inv;
        encode_backward(p.invariant, pass.cache_inv, d_psi_inv, grad->invariant);
    }
    return term;
}

template <typename Scalar>
LossTerms loss(const ModelState<Scalar>& state, std::span<const PreparedWindow<Scalar>> windows) {
    LossTerms terms;
    terms.koopman_term = accumulate_koopman_term<Scalar>(state, windows, static_cast<Index>(windows.size()), Mode::Eval,
                                                         nullptr, nullptr);
    terms.reg_term = regularization(state);
    terms.total = terms.koopman_term + state.config.lambda_reg * terms.reg_term;
    return terms;
}

template <typename Scalar>
LossTerms loss(const ModelState<Scalar>& state, const Eigen::MatrixXd& window) {
    const auto prepared = prepare_window<Scalar>(state.config, state.selection, window);
    return loss(state, std::span<const PreparedWindow<Scalar>>(&prepared, 1));
}

// Full-batch loss and gradient (eval mode unless an rng is given).
template <typename Scalar>
LossTerms loss_and_gradient(const ModelState<Scalar>& state, std::span<const PreparedWindow<Scalar>> windows,
                            ModelParameters<Scalar>& grad, Mode mode = Mode::Eval, std::mt19937_64* rng = nullptr) {
    LossTerms terms;
    terms.koopman_term =
        accumulate_koopman_term(state, windows, static_cast<Index>(windows.size()), mode, rng, &grad);
    terms.reg_term = regularization(state);
    terms.total = terms.koopman_term + state.config.lambda_reg * terms.reg_term;
    add_regularization_gradient(state, grad);
    return terms;
}

// Per-step prediction errors ||x(t+1) - x̂(t+1)||_2 of each window, n values
// per window in window order.
template <typename Scalar>
std::vector<Eigen::VectorXd> prediction_errors(const ModelState<Scalar>& state,
                                               std::span<const PreparedWindow<Scalar>> windows) {
    const auto out = forward(state, windows);
    const Index batch = out.batch;
    const Matrix<Scalar> actual = detail::stack(windows, &PreparedWindow<Scalar>::next);
    const Matrix<Scalar> diff = actual - out.x_next_pred;
    const Index steps = diff.rows() / batch;
    std::vector<Eigen::VectorXd> errors(static_cast<std::size_t>(batch), Eigen::VectorXd(steps));
    for (Index t = 0; t < steps; ++t) {
        for (Index b = 0; b < batch; ++b) {
            errors[static_cast<std::size_t>(b)](t) = static_cast<double>(diff.row(t * batch + b).norm());
        }
    }
    return errors;
}

}  // namespace koopagru
