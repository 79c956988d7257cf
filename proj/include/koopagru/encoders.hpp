#pragma once

#include "koopagru/common.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace koopagru {

// Sequences of a batch of B windows are stored time-major: row t*B + b holds
// step t of window b. Each GRU step therefore reads one contiguous row block.

enum class Mode { Eval, Train };

template <typename Scalar>
struct Dense {
    Matrix<Scalar> weight;  // out x in
    Matrix<Scalar> bias;    // 1 x out

    Dense() = default;
    Dense(Index in, Index out) : weight(Matrix<Scalar>::Zero(out, in)), bias(Matrix<Scalar>::Zero(1, out)) {}

    Index in_dim() const { return weight.cols(); }
    Index out_dim() const { return weight.rows(); }
    Index parameter_count() const { return weight.size() + bias.size(); }

    Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
        Matrix<Scalar> y(x.rows(), weight.rows());
        y.noalias() = x * weight.transpose();
        y.rowwise() += bias.row(0);
        return y;
    }

    // Accumulates parameter gradients; returns dL/dx.
    Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy, Dense& grad) const {
        grad.weight.noalias() += dy.transpose() * x;
        grad.bias += dy.colwise().sum();
        Matrix<Scalar> dx(dy.rows(), weight.cols());
        dx.noalias() = dy * weight;
        return dx;
    }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
};

// Gate order r, z, n as in the usual cuDNN/PyTorch layout:
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
template <typename Scalar>
struct GruLayer {
    Matrix<Scalar> w_ih;  // 3H x in
    Matrix<Scalar> w_hh;  // 3H x H
    Matrix<Scalar> b_ih;  // 1 x 3H
    Matrix<Scalar> b_hh;  // 1 x 3H

    GruLayer() = default;
    GruLayer(Index in, Index hidden)
        : w_ih(Matrix<Scalar>::Zero(3 * hidden, in)),
          w_hh(Matrix<Scalar>::Zero(3 * hidden, hidden)),
          b_ih(Matrix<Scalar>::Zero(1, 3 * hidden)),
          b_hh(Matrix<Scalar>::Zero(1, 3 * hidden)) {}

    Index hidden() const { return w_hh.cols(); }
    Index in_dim() const { return w_ih.cols(); }
    Index parameter_count() const { return w_ih.size() + w_hh.size() + b_ih.size() + b_hh.size(); }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) {
        f(prefix + ".w_ih", w_ih);
        f(prefix + ".w_hh", w_hh);
        f(prefix + ".b_ih", b_ih);
        f(prefix + ".b_hh", b_hh);
    }
    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        f(prefix + ".w_ih", w_ih);
        f(prefix + ".w_hh", w_hh);
        f(prefix + ".b_ih", b_ih);
        f(prefix + ".b_hh", b_hh);
    }
};

template <typename Scalar>
struct GruLayerCache {
    Matrix<Scalar> input;      // after inter-layer dropout
    Matrix<Scalar> mask;       // dropout mask (scaled); empty when inactive
    Matrix<Scalar> reset;      // nB x H
    Matrix<Scalar> update;
    Matrix<Scalar> candidate;
    Matrix<Scalar> hidden_n;   // W_hn h + b_hn
    Matrix<Scalar> output;     // nB x H
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
    using S = typename Derived::Scalar;
    return (S(1) + (-x).exp()).inverse();
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> gru_forward(const GruLayer<Scalar>& layer, const Matrix<Scalar>& input, Index batch,
                           GruLayerCache<Scalar>* cache) {
    const Index H = layer.hidden();
    const Index rows = input.rows();
    const Index steps = rows / batch;

    Matrix<Scalar> gi(rows, 3 * H);
    gi.noalias() = input * layer.w_ih.transpose();
    gi.rowwise() += layer.b_ih.row(0);

    Matrix<Scalar> out(rows, H);
    Matrix<Scalar> h = Matrix<Scalar>::Zero(batch, H);
    Matrix<Scalar> gh(batch, 3 * H);
    if (cache) {
        cache->reset.resize(rows, H);
        cache->update.resize(rows, H);
        cache->candidate.resize(rows, H);
        cache->hidden_n.resize(rows, H);
    }
    for (Index t = 0; t < steps; ++t) {
        const Index r0 = t * batch;
        gh.noalias() = h * layer.w_hh.transpose();
        gh.rowwise() += layer.b_hh.row(0);
        const auto gi_t = gi.middleRows(r0, batch);
        const Matrix<Scalar> r = detail::sigmoid(gi_t.leftCols(H).array() + gh.leftCols(H).array());
        const Matrix<Scalar> z = detail::sigmoid(gi_t.middleCols(H, H).array() + gh.middleCols(H, H).array());
        const Matrix<Scalar> n =
            (gi_t.rightCols(H).array() + r.array() * gh.rightCols(H).array()).tanh();
        h = ((Scalar(1) - z.array()) * n.array() + z.array() * h.array()).matrix();
        out.middleRows(r0, batch) = h;
        if (cache) {
            cache->reset.middleRows(r0, batch) = r;
            cache->update.middleRows(r0, batch) = z;
            cache->candidate.middleRows(r0, batch) = n;
            cache->hidden_n.middleRows(r0, batch) = gh.rightCols(H);
        }
    }
    if (cache) cache->output = out;
    return out;
}

// Backpropagation through time. Returns dL/dinput (before dropout masking).
template <typename Scalar>
Matrix<Scalar> gru_backward(const GruLayer<Scalar>& layer, const GruLayerCache<Scalar>& cache,
                            const Matrix<Scalar>& d_output, Index batch, GruLayer<Scalar>& grad) {
    const Index H = layer.hidden();
    const Index rows = d_output.rows();
    const Index steps = rows / batch;

    Matrix<Scalar> d_gi(rows, 3 * H);
    Matrix<Scalar> d_gh(batch, 3 * H);
    Matrix<Scalar> dh_next = Matrix<Scalar>::Zero(batch, H);
    Matrix<Scalar> h_prev(batch, H);
    for (Index t = steps - 1; t >= 0; --t) {
        const Index r0 = t * batch;
        if (t > 0) {
            h_prev = cache.output.middleRows(r0 - batch, batch);
        } else {
            h_prev.setZero();
        }
        const auto r = cache.reset.middleRows(r0, batch).array();
        const auto z = cache.update.middleRows(r0, batch).array();
        const auto n = cache.candidate.middleRows(r0, batch).array();
        const auto ghn = cache.hidden_n.middleRows(r0, batch).array();

        const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dh =
            d_output.middleRows(r0, batch).array() + dh_next.array();
        const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> da_n = dh * (Scalar(1) - z) * (Scalar(1) - n * n);
        const auto da_r = da_n * ghn * r * (Scalar(1) - r);
        const auto da_z = dh * (h_prev.array() - n) * z * (Scalar(1) - z);

        auto dgi_t = d_gi.middleRows(r0, batch);
        dgi_t.leftCols(H) = da_r.matrix();
        dgi_t.middleCols(H, H) = da_z.matrix();
        dgi_t.rightCols(H) = da_n.matrix();
        d_gh.leftCols(H) = dgi_t.leftCols(H);
        d_gh.middleCols(H, H) = dgi_t.middleCols(H, H);
        d_gh.rightCols(H) = (da_n * r).matrix();

        grad.w_hh.noalias() += d_gh.transpose() * h_prev;
        grad.b_hh += d_gh.colwise().sum();
        dh_next = (dh * z).matrix();
        dh_next.noalias() += d_gh * layer.w_hh;
    }
    grad.w_ih.noalias() += d_gi.transpose() * cache.input;
    grad.b_ih += d_gi.colwise().sum();
    Matrix<Scalar> d_input(rows, layer.in_dim());
    d_input.noalias() = d_gi * layer.w_ih;
    return d_input;
}

// linear -> ReLU -> linear -> ReLU -> stacked GRU [-> linear]
struct EncoderConfig {
    Index input_dim = 0;
    Index hidden1 = 100;
    Index hidden2 = 128;
    Index gru_hidden = 128;
    Index gru_layers = 1;
    double dropout = 0.01;
    // 0: the top GRU hidden state is the output (variant encoder).
    // >0: a final linear layer maps to this width (invariant encoder).
    Index output_dim = 0;

    Index output_width() const { return output_dim > 0 ? output_dim : gru_hidden; }

    void validate() const {
        if (input_dim < 1 || hidden1 < 1 || hidden2 < 1 || gru_hidden < 1) {
            throw ConfigError("encoder dimensions must be positive");
        }
        if (gru_layers < 1) throw ConfigError("gru_layers must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
        if (output_dim < 0) throw ConfigError("output_dim must be non-negative");
    }

    // Closed-form parameter count of the architecture above.
    Index parameter_count() const {
        const Index H = gru_hidden;
        Index count = hidden1 * input_dim + hidden1 + hidden2 * hidden1 + hidden2;
        count += 3 * H * (hidden2 + H) + 6 * H;
        count += (gru_layers - 1) * (3 * H * (H + H) + 6 * H);
        if (output_dim > 0) count += output_dim * H + output_dim;
        return count;
    }
};

template <typename Scalar>
struct EncoderParams {
    Dense<Scalar> in1;
    Dense<Scalar> in2;
    std::vector<GruLayer<Scalar>> gru;
    Dense<Scalar> out;  // empty for the variant encoder
    double dropout = 0.0;

    EncoderParams() = default;

    // Zero-valued parameters with the shapes implied by `cfg`.
    explicit EncoderParams(const EncoderConfig& cfg)
        : in1(cfg.input_dim, cfg.hidden1), in2(cfg.hidden1, cfg.hidden2), dropout(cfg.dropout) {
        cfg.validate();
        for (Index l = 0; l < cfg.gru_layers; ++l) gru.emplace_back(l == 0 ? cfg.hidden2 : cfg.gru_hidden, cfg.gru_hidden);
        if (cfg.output_dim > 0) out = Dense<Scalar>(cfg.gru_hidden, cfg.output_dim);
    }

    bool has_output_layer() const { return out.weight.size() > 0; }

    template <typename F>
    void for_each(const std::string& prefix, F&& f) {
        in1.for_each(prefix + ".in1", f);
        in2.for_each(prefix + ".in2", f);
        for (std::size_t l = 0; l < gru.size(); ++l) gru[l].for_each(prefix + ".gru" + std::to_string(l), f);
        if (has_output_layer()) out.for_each(prefix + ".out", f);
    }
    template <typename F>
    void for_each(const std::string& prefix, F&& f) const {
        in1.for_each(prefix + ".in1", f);
        in2.for_each(prefix + ".in2", f);
        for (std::size_t l = 0; l < gru.size(); ++l) gru[l].for_each(prefix + ".gru" + std::to_string(l), f);
        if (has_output_layer()) out.for_each(prefix + ".out", f);
    }

    Index parameter_count() const {
        Index count = 0;
        for_each("", [&](const std::string&, const Matrix<Scalar>& p) { count += p.size(); });
        return count;
    }
};

// Dense weights U(+-sqrt(1/fan_in)), GRU weights U(+-1/sqrt(H)), biases zero.
template <typename Scalar, typename Rng>
EncoderParams<Scalar> init_encoder(const EncoderConfig& cfg, Rng& rng) {
    EncoderParams<Scalar> p(cfg);
    auto fill = [&](Matrix<Scalar>& m, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
    };
    fill(p.in1.weight, std::sqrt(1.0 / static_cast<double>(cfg.input_dim)));
    fill(p.in2.weight, std::sqrt(1.0 / static_cast<double>(cfg.hidden1)));
    for (auto& layer : p.gru) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.gru_hidden));
        fill(layer.w_ih, bound);
        fill(layer.w_hh, bound);
    }
    if (p.has_output_layer()) fill(p.out.weight, std::sqrt(1.0 / static_cast<double>(cfg.gru_hidden)));
    return p;
}

template <typename Scalar>
struct EncoderCache {
    Matrix<Scalar> input;
    Matrix<Scalar> h1;  // post-ReLU
    Matrix<Scalar> h2;  // post-ReLU
    std::vector<GruLayerCache<Scalar>> gru;
    Index batch = 0;
};

// Per-step observables for a time-major stacked sequence (rows = steps * batch).
// `rng` is only consulted in training mode with non-zero dropout.
template <typename Scalar>
Matrix<Scalar> encode(const EncoderParams<Scalar>& p, const Matrix<Scalar>& x, Index batch, Mode mode,
                      std::mt19937_64* rng, EncoderCache<Scalar>* cache) {
    if (batch <= 0 || x.rows() % batch != 0) throw ShapeError("sequence rows are not a multiple of the batch size");
    if (x.cols() != p.in1.in_dim()) {
        throw ShapeError("encoder expects " + std::to_string(p.in1.in_dim()) + " input channels, got " +
                         std::to_string(x.cols()));
    }
    if (!x.allFinite()) throw NumericalError("non-finite encoder input");

    Matrix<Scalar> h1 = p.in1.forward(x).cwiseMax(Scalar(0));
    Matrix<Scalar> h2 = p.in2.forward(h1).cwiseMax(Scalar(0));
    if (cache) {
        cache->batch = batch;
        cache->input = x;
        cache->h1 = h1;
        cache->h2 = h2;
        cache->gru.assign(p.gru.size(), {});
    }

    const bool drop = mode == Mode::Train && p.dropout > 0.0;
    if (drop && rng == nullptr) throw ConfigError("training-mode dropout needs a random generator");
    Matrix<Scalar> seq = std::move(h2);
    for (std::size_t l = 0; l < p.gru.size(); ++l) {
        GruLayerCache<Scalar>* lc = cache ? &cache->gru[l] : nullptr;
        if (l > 0 && drop) {
            std::bernoulli_distribution keep(1.0 - p.dropout);
            const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - p.dropout));
            Matrix<Scalar> mask(seq.rows(), seq.cols());
            for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : Scalar(0);
            seq = seq.cwiseProduct(mask);
            if (lc) lc->mask = std::move(mask);
        }
        if (lc) lc->input = seq;
        seq = gru_forward(p.gru[l], seq, batch, lc);
    }
    if (p.has_output_layer()) return p.out.forward(seq);
    return seq;
}

// Accumulates into `grad` (shaped like `p`). Input gradients are not needed:
// encoder inputs are data.
template <typename Scalar>
void encode_backward(const EncoderParams<Scalar>& p, const EncoderCache<Scalar>& cache, const Matrix<Scalar>& d_out,
                     EncoderParams<Scalar>& grad) {
    Matrix<Scalar> d = d_out;
    if (p.has_output_layer()) d = p.out.backward(cache.gru.back().output, d, grad.out);
    for (std::size_t l = p.gru.size(); l-- > 0;) {
        d = gru_backward(p.gru[l], cache.gru[l], d, cache.batch, grad.gru[l]);
        if (cache.gru[l].mask.size() > 0) d = d.cwiseProduct(cache.gru[l].mask);
    }
    d = d.cwiseProduct((cache.h2.array() > Scalar(0)).template cast<Scalar>().matrix());
    d = p.in2.backward(cache.h1, d, grad.in2);
    d = d.cwiseProduct((cache.h1.array() > Scalar(0)).template cast<Scalar>().matrix());
    p.in1.backward(cache.input, d, grad.in1);
}

// Measurement-inclusive observables: [x | psi] row by row.
template <typename Scalar>
Matrix<Scalar> lift(const Matrix<Scalar>& x, const Matrix<Scalar>& psi) {
    if (x.rows() != psi.rows()) {
        throw ShapeError("lift: " + std::to_string(x.rows()) + " measurement rows vs " + std::to_string(psi.rows()) +
                         " observable rows");
    }
    Matrix<Scalar> out(x.rows(), x.cols() + psi.cols());
    out << x, psi;
    return out;
}

}  // namespace koopagru
