#include "koopagru/data_io.hpp"
#include "koopagru/koopman.hpp"
#include "koopagru/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace koopagru;
using Md = Eigen::MatrixXd;

namespace {

std::pair<Md, Md> trajectory(const Md& a, const Eigen::VectorXd& x0, Index steps) {
    synth::LinearSystemSpec spec;
    spec.A = a;
    spec.x0 = x0;
    spec.steps = steps;
    return shift_pair(synth::gen_linear_system(spec).values);
}

}  // namespace

TEST_CASE("apply_operator examples") {
    std::mt19937_64 rng(1);
    const Md seq = testing::random_matrix(6, 3, rng);
    CHECK(apply_operator<double>(Md::Identity(3, 3), seq) == seq);
    CHECK(apply_operator<double>(Md::Zero(3, 3), seq).isZero(0.0));

    Md row(1, 2);
    row << 1, 3;
    const Md twice = apply_operator<double>(Md(2.0 * Md::Identity(2, 2)), row);
    CHECK(twice(0, 0) == 2.0);
    CHECK(twice(0, 1) == 6.0);

    CHECK_THROWS_AS(apply_operator<double>(Md::Identity(4, 4), seq), ShapeError);
    CHECK_THROWS_AS(KoopmanOperator<double>(Md::Zero(2, 3), Branch::Variant), ShapeError);
}

TEST_CASE("apply_operator acts on rows as K x") {
    std::mt19937_64 rng(2);
    const Md k = testing::random_matrix(4, 4, rng);
    const Md seq = testing::random_matrix(5, 4, rng);
    const KoopmanOperator<double> op(k, Branch::Variant);
    const Md out = apply_operator(op, seq);
    for (Index i = 0; i < 5; ++i) {
        const Eigen::VectorXd expected = k * seq.row(i).transpose();
        CHECK((out.row(i).transpose() - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("apply_operator is linear") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Md k = testing::random_matrix(5, 5, rng);
        const Md s1 = testing::random_matrix(7, 5, rng);
        const Md s2 = testing::random_matrix(7, 5, rng);
        const double a = 0.3 + trial * 0.01;
        const double b = -1.1;
        const Md lhs = apply_operator<double>(k, Md(a * s1 + b * s2));
        const Md rhs = a * apply_operator<double>(k, s1) + b * apply_operator<double>(k, s2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("operator norms") {
    CHECK(operator_norms<double>(Md::Zero(3, 3), Md::Zero(2, 2)) == 0.0);
    CHECK(operator_norms<double>(Md::Identity(3, 3), Md::Zero(2, 2)) == doctest::Approx(std::sqrt(3.0)));
    Md k(2, 2);
    k << 3, 4, 0, 0;
    CHECK(operator_norms<double>(k, Md::Zero(1, 1)) == doctest::Approx(5.0));
    CHECK(operator_norms<double>(k, k) == doctest::Approx(10.0));
}

TEST_CASE("operator-norm gradient is K / ||K||") {
    std::mt19937_64 rng(4);
    Md kv = testing::random_matrix(4, 4, rng);
    Md ki = testing::random_matrix(2, 2, rng);
    const double h = 1e-6;
    auto check = [&](Md& k, const Md& analytic) {
        for (Index i = 0; i < k.size(); ++i) {
            const double keep = k.data()[i];
            k.data()[i] = keep + h;
            const double up = operator_norms(kv, ki);
            k.data()[i] = keep - h;
            const double down = operator_norms(kv, ki);
            k.data()[i] = keep;
            CHECK(testing::relative_error((up - down) / (2 * h), analytic.data()[i]) < 1e-6);
        }
    };
    check(kv, kv / kv.norm());
    check(ki, ki / ki.norm());
}

TEST_CASE("init_operator is a small perturbation of the identity") {
    std::mt19937_64 rng(5);
    const Md k = init_operator<double>(6, rng);
    CHECK((k - Md::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(k != Md::Identity(6, 6));
}

TEST_CASE("DMD recovers a diagonal generator") {
    const Md a = Eigen::Vector2d(0.9, 0.5).asDiagonal();
    const auto [xt, xn] = trajectory(a, Eigen::Vector2d(1.0, 1.0), 40);
    const Md k = dmd_least_squares(xt, xn);
    CHECK((k - a).cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::VectorXcd ev = k.eigenvalues();
    std::vector<double> re{ev(0).real(), ev(1).real()};
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(re[1] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("DMD recovers a rotation and its unit-circle spectrum") {
    const double theta = 0.3;
    Md a(2, 2);
    a << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const auto [xt, xn] = trajectory(a, Eigen::Vector2d(1.0, 0.0), 60);
    const Md k = dmd_least_squares(xt, xn);
    CHECK((k - a).cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::VectorXcd ev = k.eigenvalues();
    for (Index i = 0; i < 2; ++i) {
        CHECK(std::abs(std::abs(ev(i)) - 1.0) < 1e-6);
        CHECK(std::abs(std::abs(std::arg(ev(i))) - theta) < 1e-6);
    }
}

TEST_CASE("DMD on a constant series fixes its row space") {
    Md xt(10, 3);
    xt.rowwise() = Eigen::RowVector3d(1.0, -2.0, 0.5);
    const Md k = dmd_least_squares(xt, xt);
    CHECK((k * xt.transpose() - xt.transpose()).norm() < 1e-8);
}

TEST_CASE("DMD is a local least-squares optimum") {
    std::mt19937_64 rng(6);
    const Md xt = testing::random_matrix(50, 3, rng);
    const Md xn = xt * testing::random_matrix(3, 3, rng, 0.4).transpose() + testing::random_matrix(50, 3, rng, 0.05);
    const Md k = dmd_least_squares(xt, xn);
    auto residual = [&](const Md& kk) { return (xn - apply_operator<double>(kk, xt)).norm(); };
    const double best = residual(k);
    for (int trial = 0; trial < 200; ++trial) {
        const Md e = testing::random_matrix(3, 3, rng);
        CHECK(best <= residual(Md(k + 1e-4 * e)));
    }
}
