#pragma once

#include "koopagru/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

namespace koopagru {

struct TrainConfig {
    double learning_rate = 1e-2;
    Index batch_size = 128;
    Index max_epochs = 50;
    Index patience = 10;
    std::uint64_t seed = 0;
    std::optional<double> grad_clip;  // global L2 norm
    // Windows per forward/backward pass; bounds activation memory without
    // changing the gradient (the batch mean is accumulated exactly).
    Index micro_batch = 32;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (micro_batch < 1) throw ConfigError("micro_batch must be >= 1");
        if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be > 0");
    }
};

struct TrainReport {
    std::vector<double> train_loss;  // mean batch loss per epoch
    std::vector<double> val_loss;    // eval-mode loss after each epoch
    Index best_epoch = -1;           // index into val_loss; -1 when no epoch ran
    double best_val_loss = 0.0;
    bool stopped_early = false;
};

template <typename Scalar>
struct TrainResult {
    ModelState<Scalar> state;  // best-validation parameters
    TrainReport report;
};

template <typename Scalar>
class Adam {
public:
    Adam(const ModelParameters<Scalar>& like, const TrainConfig& cfg)
        : m_(like.zeros_like()), v_(like.zeros_like()), cfg_(cfg) {}

    void step(ModelParameters<Scalar>& params, const ModelParameters<Scalar>& grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
        const auto b1 = static_cast<Scalar>(cfg_.adam_beta1);
        const auto b2 = static_cast<Scalar>(cfg_.adam_beta2);
        const auto step_size = static_cast<Scalar>(cfg_.learning_rate / bc1);
        const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
        const auto eps = static_cast<Scalar>(cfg_.adam_epsilon);

        auto p = pointers(params);
        std::vector<const Matrix<Scalar>*> g;
        grad.for_each([&](const std::string&, const Matrix<Scalar>& x) { g.push_back(&x); });
        auto m = pointers(m_);
        auto v = pointers(v_);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i]->array() = b1 * m[i]->array() + (Scalar(1) - b1) * g[i]->array();
            v[i]->array() = b2 * v[i]->array() + (Scalar(1) - b2) * g[i]->array().square();
            p[i]->array() -= step_size * m[i]->array() / (v[i]->array().sqrt() * inv_sqrt_bc2 + eps);
        }
    }

private:
    static std::vector<Matrix<Scalar>*> pointers(ModelParameters<Scalar>& params) {
        std::vector<Matrix<Scalar>*> out;
        params.for_each([&](const std::string&, Matrix<Scalar>& p) { out.push_back(&p); });
        return out;
    }

    ModelParameters<Scalar> m_;
    ModelParameters<Scalar> v_;
    TrainConfig cfg_;
    std::int64_t t_ = 0;
};

template <typename Scalar>
double gradient_norm(const ModelParameters<Scalar>& grad) {
    double sq = 0.0;
    grad.for_each([&](const std::string&, const Matrix<Scalar>& g) { sq += static_cast<double>(g.squaredNorm()); });
    return std::sqrt(sq);
}

// Eval-mode mean loss over prepared windows.
template <typename Scalar>
LossTerms mean_loss(const ModelState<Scalar>& state, const std::vector<PreparedWindow<Scalar>>& windows,
                    Index chunk) {
    LossTerms terms;
    const auto total = static_cast<Index>(windows.size());
    for (Index begin = 0; begin < total; begin += chunk) {
        const Index count = std::min(chunk, total - begin);
        terms.koopman_term += accumulate_koopman_term<Scalar>(
            state, std::span(windows).subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(count)), total,
            Mode::Eval, nullptr, nullptr);
    }
    terms.reg_term = regularization(state);
    terms.total = terms.koopman_term + state.config.lambda_reg * terms.reg_term;
    return terms;
}

// ADAM on the total loss with patience-based early stopping on validation
// loss. Returns the parameters of the best validation epoch.
template <typename Scalar>
TrainResult<Scalar> train(ModelState<Scalar> state, const DatasetSplit& split, const TrainConfig& cfg) {
    cfg.validate();
    const Index window = state.config.window;
    if (split.train.length() < window) throw TrainError("training partition is shorter than one window");
    if (split.val.length() < window) throw TrainError("validation partition is shorter than one window");

    TrainResult<Scalar> result{state, {}};
    if (cfg.max_epochs == 0) return result;

    const auto train_windows = prepare_windows<Scalar>(state.config, state.selection, make_windows(split.train, window));
    const auto val_windows = prepare_windows<Scalar>(state.config, state.selection, make_windows(split.val, window));
    if (train_windows.empty()) throw TrainError("no training windows");

    std::mt19937_64 rng(cfg.seed);
    Adam<Scalar> adam(state.params, cfg);
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    auto& report = result.report;
    Index since_best = 0;
    for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        Index batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            const auto batch_size = static_cast<Index>(end - begin);
            auto grad = state.params.zeros_like();
            LossTerms terms;
            for (std::size_t c = begin; c < end; c += static_cast<std::size_t>(cfg.micro_batch)) {
                const std::size_t c_end = std::min(end, c + static_cast<std::size_t>(cfg.micro_batch));
                std::vector<PreparedWindow<Scalar>> chunk;
                chunk.reserve(c_end - c);
                for (std::size_t i = c; i < c_end; ++i) chunk.push_back(train_windows[order[i]]);
                terms.koopman_term += accumulate_koopman_term<Scalar>(state, chunk, batch_size, Mode::Train, &rng, &grad);
            }
            terms.reg_term = regularization(state);
            terms.total = terms.koopman_term + state.config.lambda_reg * terms.reg_term;
            if (!std::isfinite(terms.total)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << " batch " << batches << " (koopman=" << terms.koopman_term
                    << ", reg=" << terms.reg_term << ")";
                throw NumericalError(msg.str());
            }
            add_regularization_gradient(state, grad);
            if (cfg.grad_clip) {
                const double norm = gradient_norm(grad);
                if (norm > *cfg.grad_clip) {
                    const auto scale = static_cast<Scalar>(*cfg.grad_clip / norm);
                    grad.for_each([&](const std::string&, Matrix<Scalar>& g) { g *= scale; });
                }
            }
            adam.step(state.params, grad);
            epoch_loss += terms.total;
            ++batches;
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(batches));

        const double val = val_windows.empty() ? report.train_loss.back()
                                               : mean_loss(state, val_windows, cfg.micro_batch).total;
        if (!std::isfinite(val)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
        report.val_loss.push_back(val);
        if (report.best_epoch < 0 || val < report.best_val_loss) {
            report.best_epoch = epoch;
            report.best_val_loss = val;
            result.state = state;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            report.stopped_early = true;
            break;
        }
    }
    return result;
}

}  // namespace koopagru
