#pragma once

#include "koopagru/common.hpp"

#include <Eigen/QR>

#include <random>
#include <string>

namespace koopagru {

enum class Branch { Variant, Invariant };

// A fixed-size square operator advancing lifted observables one step.
template <typename Scalar>
struct KoopmanOperator {
    Matrix<Scalar> matrix;
    Branch branch = Branch::Variant;

    KoopmanOperator() = default;
    KoopmanOperator(Matrix<Scalar> m, Branch b) : matrix(std::move(m)), branch(b) {
        if (matrix.rows() != matrix.cols()) throw ShapeError("Koopman operator must be square");
    }

    Index dim() const { return matrix.rows(); }
};

// I + U(-1e-3, 1e-3).
template <typename Scalar, typename Rng>
Matrix<Scalar> init_operator(Index dim, Rng& rng) {
    std::uniform_real_distribution<double> dist(-1e-3, 1e-3);
    Matrix<Scalar> k = Matrix<Scalar>::Identity(dim, dim);
    for (Index i = 0; i < k.size(); ++i) k.data()[i] += static_cast<Scalar>(dist(rng));
    return k;
}

// Rows are observables at successive steps, so out[i] = K * seq[i]^T.
template <typename Scalar, typename Derived>
Matrix<Scalar> apply_operator(const Matrix<Scalar>& k, const Eigen::MatrixBase<Derived>& seq) {
    if (seq.cols() != k.cols()) {
        throw ShapeError("operator of size " + std::to_string(k.cols()) + " applied to width " +
                         std::to_string(seq.cols()));
    }
    Matrix<Scalar> out(seq.rows(), k.rows());
    out.noalias() = seq * k.transpose();
    return out;
}

template <typename Scalar, typename Derived>
Matrix<Scalar> apply_operator(const KoopmanOperator<Scalar>& op, const Eigen::MatrixBase<Derived>& seq) {
    return apply_operator(op.matrix, seq);
}

template <typename Scalar>
Scalar operator_norms(const Matrix<Scalar>& k_var, const Matrix<Scalar>& k_inv) {
    return k_var.norm() + k_inv.norm();
}

// Closed-form DMD: minimum-norm K minimising ||X_next^T - K X_t^T||_F.
template <typename Scalar>
Matrix<Scalar> dmd_least_squares(const Matrix<Scalar>& x_t, const Matrix<Scalar>& x_next) {
    if (x_t.rows() != x_next.rows() || x_t.cols() != x_next.cols()) {
        throw ShapeError("dmd_least_squares: snapshot matrices differ in shape");
    }
    const Matrix<Scalar> kt = x_t.completeOrthogonalDecomposition().solve(x_next);
    return kt.transpose();
}

}  // namespace koopagru
