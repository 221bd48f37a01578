#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rebal/riccati.hpp"

using namespace rebal;

namespace {

SymMatrix sym(const oracle::Mat& m) { return SymMatrix::from_upper(Matrix(m)); }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidInput;
}

} // namespace

TEST(SolveEll, ScalarClosedForm) {
    // d = 1: 2 l j l + 4 l j l = k^2 j, so l = |k| / sqrt(6)
    for (const double j : {0.01, 1.0, 37.0}) {
        for (const double k : {-3.0, 0.2, 5.0}) {
            Matrix K(1, 1);
            K(0, 0) = k;
            SymMatrix J = SymMatrix::identity(1);
            Vector jv(1);
            jv(0) = j;
            J = SymMatrix::diagonal(jv);
            const RiccatiSolution sol = solve_ell(J, K);
            EXPECT_NEAR(sol.L(0, 0), std::abs(k) / std::sqrt(6.0), 1e-12 * std::abs(k));
            EXPECT_NEAR(sol.trace_LJ, j * std::abs(k) / std::sqrt(6.0), 1e-12 * j * std::abs(k));
        }
    }
}

TEST(SolveEll, IsotropicSolution) {
    for (int d = 1; d <= 8; ++d) {
        const RiccatiSolution sol = solve_ell(SymMatrix::identity(d), Matrix::Identity(d, d));
        const Matrix expect = Matrix::Identity(d, d) / std::sqrt(2.0 * d + 4.0);
        EXPECT_LE((sol.L.matrix() - expect).norm(), 1e-12) << d;
        // t = tr(J^{1/2} L J^{1/2}) = d / sqrt(2d + 4)
        EXPECT_NEAR(sol.scalar_root, d / std::sqrt(2.0 * d + 4.0), 1e-12);
    }
}

TEST(EllResidual, HandExamples) {
    const SymMatrix I2 = SymMatrix::identity(2);
    const Matrix K = Matrix::Identity(2, 2);
    const SymMatrix iso = SymMatrix::diagonal(Vector::Constant(2, 1.0 / std::sqrt(8.0)));
    EXPECT_LE(ell_residual(I2, K, iso), 1e-12);
    // 2 tr(I) I + 4 I - I = 7 I, Frobenius norm 7 sqrt 2
    EXPECT_NEAR(ell_residual(I2, K, I2), 7.0 * std::sqrt(2.0), 1e-12);
    EXPECT_EQ(code_of([&] { ell_residual(I2, Matrix::Identity(3, 3), I2); }), ErrorCode::InvalidInput);
}

TEST(SolveEll, Errors) {
    const SymMatrix I2 = SymMatrix::identity(2);
    Matrix singular(2, 2);
    singular << 1, 2, 2, 4;
    EXPECT_EQ(code_of([&] { solve_ell(I2, singular); }), ErrorCode::SingularK);
    EXPECT_EQ(code_of([&] { solve_ell(I2, Matrix::Zero(2, 2)); }), ErrorCode::SingularK);
    Matrix notspd(2, 2);
    notspd << 1, 0, 0, -1;
    EXPECT_EQ(code_of([&] { solve_ell(SymMatrix::from_upper(notspd), Matrix::Identity(2, 2)); }),
              ErrorCode::NotPositiveDefinite);
    EXPECT_EQ(code_of([&] { solve_ell(I2, Matrix::Identity(3, 3)); }), ErrorCode::InvalidInput);
}

TEST(SolveEll, ResidualContractOnRandomInputs) {
    auto g = oracle::rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + trial % 8;
        const oracle::Mat J = oracle::spd(d, 1e-3, 1e3, g).m;
        const oracle::Mat K = oracle::regular(d, 1e-2, 1e2, g);
        const RiccatiSolution sol = solve_ell(sym(J), Matrix(K));
        const oracle::Mat L = sol.L.matrix();
        const double rhs = (K.transpose() * J * K).norm();
        EXPECT_LE(oracle::riccati_residual(J, K, L), 1e-10 * rhs) << trial;
        EXPECT_GT(sol.trace_LJ, 0.0);
        Eigen::SelfAdjointEigenSolver<oracle::Mat> es(L);
        EXPECT_GT(es.eigenvalues()(0), 0.0);
    }
}

TEST(SolveEll, AgreesWithNewtonOracle) {
    auto g = oracle::rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 5;
        const oracle::Mat J = oracle::spd(d, 0.2, 5.0, g).m;
        const oracle::Mat K = oracle::regular(d, 0.2, 5.0, g);
        const oracle::Mat ref = oracle::riccati_newton(J, K);
        ASSERT_LE(oracle::riccati_residual(J, K, ref), 1e-11 * (K.transpose() * J * K).norm());
        Eigen::SelfAdjointEigenSolver<oracle::Mat> es(ref);
        ASSERT_GT(es.eigenvalues()(0), 0.0) << "oracle left the positive cone";
        const RiccatiSolution sol = solve_ell(sym(J), Matrix(K));
        EXPECT_LE((sol.L.matrix() - Matrix(ref)).norm(), 1e-10 * ref.norm()) << trial;
    }
}

TEST(SolveEll, ScalingLaw) {
    auto g = oracle::rng(4);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int d = 1 + trial % 8;
        const oracle::Mat J = oracle::spd(d, 1e-2, 1e2, g).m;
        const oracle::Mat K = oracle::regular(d, 1e-1, 1e1, g);
        double alpha = u(g);
        if (std::abs(alpha) < 1e-2) alpha = -0.3;
        const Matrix base = solve_ell(sym(J), Matrix(K)).L.matrix();
        const Matrix scaled = solve_ell(sym(J), Matrix(alpha * K)).L.matrix();
        EXPECT_LE((scaled - std::abs(alpha) * base).norm(), 1e-9 * std::abs(alpha) * base.norm());
    }
}

TEST(SolveEll, ContinuityUnderSmallPerturbation) {
    auto g = oracle::rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + trial % 8;
        const oracle::Mat J = oracle::spd(d, 1e-2, 1e2, g).m;
        const oracle::Mat K = oracle::regular(d, 1e-1, 1e1, g);
        oracle::Mat dJ = oracle::gaussian(d, d, g);
        dJ = (0.5 * (dJ + dJ.transpose())).eval();
        const oracle::Mat dK = oracle::gaussian(d, d, g);
        const oracle::Mat J2 = J + 1e-8 * J.norm() / dJ.norm() * dJ;
        const oracle::Mat K2 = K + 1e-8 * K.norm() / dK.norm() * dK;
        const Matrix a = solve_ell(sym(J), Matrix(K)).L.matrix();
        const Matrix b = solve_ell(sym(J2), Matrix(K2)).L.matrix();
        EXPECT_LE((a - b).norm(), 1e-5 * a.norm()) << trial;
    }
}

TEST(SolveEll, IdentityJCommutesWithKtK) {
    auto g = oracle::rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 8;
        const oracle::Mat K = oracle::regular(d, 1e-1, 1e1, g);
        const oracle::Mat L = solve_ell(SymMatrix::identity(d), Matrix(K)).L.matrix();
        const oracle::Mat ktk = K.transpose() * K;
        EXPECT_LE((L * ktk - ktk * L).norm(), 1e-9 * L.norm() * ktk.norm());
    }
}

TEST(SolveEll, DependsOnKOnlyThroughKtJK) {
    auto g = oracle::rng(12);
    const oracle::Mat J = oracle::spd(3, 0.5, 2.0, g).m;
    const oracle::Mat K = oracle::regular(3, 0.5, 2.0, g);
    const oracle::Mat Jh = oracle::sqrtm(J), Jhi = Jh.inverse();
    // K' = J^{-1/2} Q J^{1/2} K with Q orthogonal leaves K^T J K unchanged
    const oracle::Mat K2 = Jhi * oracle::orthogonal(3, g) * Jh * K;
    const Matrix a = solve_ell(sym(J), Matrix(K)).L.matrix();
    const Matrix b = solve_ell(sym(J), Matrix(K2)).L.matrix();
    EXPECT_LE((a - b).norm(), 1e-10 * a.norm());
}

TEST(ScalarFunction, StrictlyDecreasingOnBracket) {
    auto g = oracle::rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 8;
        Vector c(d);
        for (int i = 0; i < d; ++i) c(i) = oracle::log_uniform(1e-6, 1e6, g);
        const double hi = 0.5 * c.cwiseSqrt().sum();
        EXPECT_GT(ell_scalar_g(c, 0.0), 0.0);
        EXPECT_LE(ell_scalar_g(c, hi), 0.0);
        double prev = ell_scalar_g(c, 0.0);
        for (int k = 1; k <= 200; ++k) {
            const double v = ell_scalar_g(c, hi * k / 200.0);
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
}

TEST(SolveEll, SeverelyIllConditionedReduction) {
    // C has eigenvalues j_i^2 k_i^2 spanning twenty decades
    Vector jd(2), kd(2);
    jd << 1e-3, 1e3;
    kd << 1e-2, 1e2;
    const SymMatrix J = SymMatrix::diagonal(jd);
    const Matrix K = kd.asDiagonal();
    const RiccatiSolution sol = solve_ell(J, K);
    const Matrix rhs = K.transpose() * J.matrix() * K;
    EXPECT_LE(sol.residual_norm, 1e-10 * rhs.norm());
    EXPECT_GT(sol.L(0, 0), 0.0);
    EXPECT_GT(sol.L(1, 1), 0.0);

    const RiccatiSolution via_rhs = solve_ell_rhs(J, SymMatrix::from_upper(rhs));
    EXPECT_LE((via_rhs.L.matrix() - sol.L.matrix()).norm(), 1e-10 * sol.L.frobenius_norm());
}

TEST(SolveEllRhs, MatchesSolveEll) {
    auto g = oracle::rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 6;
        const oracle::Mat J = oracle::spd(d, 1e-2, 1e2, g).m;
        const oracle::Mat K = oracle::regular(d, 1e-1, 1e1, g);
        const Matrix a = solve_ell(sym(J), Matrix(K)).L.matrix();
        const Matrix b = solve_ell_rhs(sym(J), sym(K.transpose() * J * K)).L.matrix();
        EXPECT_LE((a - b).norm(), 1e-10 * a.norm()) << trial;
    }
}
