#include <gtest/gtest.h>

#include <cmath>

#include "rebal/rebalance.hpp"
#include "synthetic.hpp"

using namespace rebal;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (const double x : xs) v(i++) = x;
    return v;
}

ModelSpec two_asset(double r = 0.02) {
    Matrix s(2, 2);
    s << 0.04, 0.01, 0.01, 0.09;
    return black_scholes_model(vec({0.06, 0.08}), r, SymMatrix::from_upper(s), vec({0.3, 0.4}));
}

ModelSpec one_asset(double pi = 0.5) {
    return black_scholes_model(vec({0.05}), 0.0, SymMatrix::diagonal(vec({0.04})), vec({pi}));
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidInput;
}

double functional(const SamplePath& p, std::size_t tau, const double* xi, std::size_t k) {
    const auto d = p.d;
    Vector diff(d);
    for (int i = 0; i < d; ++i) diff(i) = p.H.row(k)[i] - xi[i];
    return diff.dot(p.L.mat(tau, d) * diff);
}

} // namespace

TEST(Hitting, HugeEpsilonNeverStops) {
    const SamplePath p = build_sample_path(two_asset(), 4096, {1, 0});
    const RebalanceSchedule s = hitting_schedule(p, 1e6, two_asset());
    EXPECT_EQ(s.stops(), 1u);
    EXPECT_EQ(s.stop_indices[0], 0u);
    EXPECT_EQ(s.position(0), p.H.vec(0));
}

TEST(Hitting, SingleJumpGivesSingleStop) {
    SamplePath p = synthetic::flat_path(1, 128);
    for (std::size_t k = 50; k <= 128; ++k) p.H.row(k)[0] = 1.0;
    p.trace_lj.assign(129, 1.0);
    // barrier 0.5, expected steps 0.5 * 128 = 64
    const RebalanceSchedule s = hitting_schedule(p, 0.5, one_asset());
    ASSERT_EQ(s.stops(), 2u);
    EXPECT_EQ(s.stop_indices[1], 50u);
    EXPECT_EQ(s.position(1)(0), 1.0);
    EXPECT_DOUBLE_EQ(s.max_overshoot, 1.0);
    EXPECT_DOUBLE_EQ(s.mean_overshoot, 1.0);
}

TEST(Hitting, StopsExactlyWhenTheEllipsoidIsLeft) {
    const ModelSpec model = two_asset();
    const SamplePath p = build_sample_path(model, 1u << 14, {2, 0});
    const double eps = 256.0 * p.trace_lj[0] * p.dt();
    const RebalanceSchedule s = hitting_schedule(p, eps, model);
    ASSERT_GT(s.stops(), 5u);
    std::size_t j = 0;
    for (std::size_t k = 1; k <= p.G; ++k) {
        const std::size_t tau = s.stop_indices[j];
        const double f = functional(p, tau, s.xi.data() + j * 2, k);
        const double barrier = eps * std::sqrt(p.N[tau] / p.Q[tau]);
        if (j + 1 < s.stops() && s.stop_indices[j + 1] == k) {
            EXPECT_GE(f, barrier) << k;
            ++j;
            EXPECT_EQ(s.position(j), p.H.vec(k));
        } else {
            EXPECT_LT(f, barrier) << k;
        }
    }
    EXPECT_GE(s.max_overshoot, s.mean_overshoot);
    EXPECT_GE(s.mean_overshoot, 0.0);
}

TEST(Hitting, IsPredictable) {
    const ModelSpec model = two_asset();
    const SamplePath p = build_sample_path(model, 1u << 13, {3, 0});
    const double eps = 128.0 * p.trace_lj[0] * p.dt();
    const RebalanceSchedule full = hitting_schedule(p, eps, model);

    // a different future after node k0 cannot move earlier stops
    const std::size_t k0 = p.G / 2;
    SamplePath altered = p;
    for (std::size_t k = k0 + 1; k <= p.G; ++k) {
        for (int i = 0; i < 2; ++i) altered.H.row(k)[i] *= 1.5;
    }
    const RebalanceSchedule cut = hitting_schedule(altered, eps, model);
    for (std::size_t j = 0; j < full.stops() && full.stop_indices[j] <= k0; ++j) {
        ASSERT_LT(j, cut.stops());
        EXPECT_EQ(cut.stop_indices[j], full.stop_indices[j]);
    }
}

TEST(Hitting, RejectsCoarseGridsAndBadEpsilon) {
    const ModelSpec model = two_asset();
    const SamplePath p = build_sample_path(model, 1024, {4, 0});
    const double eps = 10.0 * p.trace_lj[0] * p.dt();
    EXPECT_EQ(code_of([&] { hitting_schedule(p, eps, model); }), ErrorCode::GridTooCoarse);
    EXPECT_NO_THROW(hitting_schedule(p, eps, model, {.min_steps = 8.0}));
    EXPECT_NEAR(expected_steps_per_rebalance(p, eps), 10.0, 1e-12);
    EXPECT_EQ(code_of([&] { hitting_schedule(p, 0.0, model); }), ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([&] { hitting_schedule(p, -1.0, model); }), ErrorCode::InvalidInput);
}

TEST(Hitting, ImplementableSharesUseDiscreteWealth) {
    const ModelSpec model = two_asset();
    const SamplePath p = build_sample_path(model, 1u << 14, {5, 0});
    const double eps = 128.0 * p.trace_lj[0] * p.dt();
    const RebalanceSchedule s = hitting_schedule(p, eps, model, {.shares = SharesMode::Implementable});
    ASSERT_EQ(s.vn.size(), p.G + 1);
    ASSERT_GT(s.stops(), 2u);
    for (std::size_t j = 0; j < s.stops(); ++j) {
        const std::size_t tau = s.stop_indices[j];
        for (int i = 0; i < 2; ++i) {
            const double expect = model.pi(p.time(tau))(i) * s.vn[tau] / p.S.row(tau)[i];
            EXPECT_NEAR(s.position(j)(i), expect, 1e-14 * std::abs(expect));
        }
    }
    // the tracked wealth stays close to the continuous plan
    EXPECT_NEAR(s.vn.back() / p.V.back(), 1.0, 0.05);
    // and agrees with replaying the schedule
    const std::vector<double> replay = discrete_wealth(s, p, model);
    for (std::size_t k = 0; k <= p.G; k += 1024) EXPECT_NEAR(replay[k], s.vn[k], 1e-12 * s.vn[k]);
}

TEST(Equidistant, StopPattern) {
    const ModelSpec model = two_asset();
    const SamplePath p = build_sample_path(model, 8, {6, 0});
    const RebalanceSchedule s4 = equidistant_schedule(p, 4);
    EXPECT_EQ(s4.stop_indices, (std::vector<std::size_t>{0, 2, 4, 6}));
    EXPECT_EQ(s4.position(2), p.H.vec(4));
    EXPECT_EQ(equidistant_schedule(p, 1).stops(), 1u);
    const RebalanceSchedule all = equidistant_schedule(p, 8);
    EXPECT_EQ(all.stops(), 8u);
    EXPECT_EQ(all.stop_indices.back(), 7u);
    EXPECT_EQ(code_of([&] { equidistant_schedule(p, 3); }), ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([&] { equidistant_schedule(p, 0); }), ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([&] { equidistant_schedule(p, 16); }), ErrorCode::InvalidInput);
}

TEST(PositionsOnGrid, HoldsBetweenStops) {
    const auto s = synthetic::manual_schedule(1, {0, 3, 5}, {1.0, 2.0, 3.0});
    const std::vector<double> x = positions_on_grid(s, 6);
    EXPECT_EQ(x, (std::vector<double>{1, 1, 1, 2, 2, 3, 3}));
}

TEST(DiscreteWealth, RiskFreeMarketGrowsAtTheRate) {
    // sigma = 0, mu = r: every asset is a bond
    const double r = 0.05;
    const std::size_t G = 64;
    SamplePath p = synthetic::flat_path(2, G);
    for (std::size_t k = 0; k <= G; ++k) {
        const double g = std::exp(r * p.time(k));
        p.S0[k] = g;
        p.V[k] = g;
        p.S.row(k)[0] = 2.0 * g;
        p.S.row(k)[1] = 0.5 * g;
        p.H.row(k)[0] = 0.3 * g / p.S.row(k)[0];
        p.H.row(k)[1] = 0.4 * g / p.S.row(k)[1];
    }
    const RebalanceSchedule s = equidistant_schedule(p, 8);
    const std::vector<double> vn = discrete_wealth(s, p, two_asset(r));
    EXPECT_NEAR(vn.back(), std::exp(r), 1e-13);
}

TEST(DiscreteWealth, HoldingOneShareTelescopes) {
    const ModelSpec model = one_asset();
    const SamplePath p = build_sample_path(model, 512, {7, 0});
    const auto s = synthetic::manual_schedule(1, {0}, {1.0});
    const std::vector<double> vn = discrete_wealth(s, p, model);
    for (std::size_t k = 0; k <= 512; k += 64) {
        EXPECT_NEAR(vn[k], p.V[0] + p.S.row(k)[0] - p.S.row(0)[0], 1e-13);
    }
}

TEST(DiscreteWealth, ConvergesAtOrderOneHalf) {
    // RMS of V^n - V at G, 4G, 16G with n = G rebalances
    const ModelSpec model = two_asset();
    constexpr int kPaths = 24;
    double err[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < kPaths; ++i) {
        const MarketPath fine = simulate_market(model, 1u << 14, {8, static_cast<std::uint64_t>(i)});
        int level = 0;
        for (const std::size_t factor : {16u, 4u, 1u}) {
            const SamplePath p = build_sample_path(model, coarsen(fine, factor));
            const std::vector<double> vn = discrete_wealth(equidistant_schedule(p, p.G), p, model);
            const double e = vn.back() - p.V.back();
            err[level++] += e * e;
        }
    }
    const double ratio1 = std::sqrt(err[1] / err[0]);
    const double ratio2 = std::sqrt(err[2] / err[1]);
    EXPECT_GT(ratio1, 0.35);
    EXPECT_LT(ratio1, 0.7);
    EXPECT_GT(ratio2, 0.35);
    EXPECT_LT(ratio2, 0.7);
}

TEST(DiscreteWealth, CrashWithLeverageIsBankruptcy) {
    SamplePath p = synthetic::flat_path(1, 4);
    p.S.row(2)[0] = 0.4;
    p.S.row(3)[0] = 0.4;
    p.S.row(4)[0] = 0.4;
    const auto s = synthetic::manual_schedule(1, {0}, {2.0});
    EXPECT_EQ(code_of([&] { discrete_wealth(s, p, one_asset(2.0)); }), ErrorCode::Bankruptcy);
}

TEST(DiscreteWealth, RejectsMismatchedSchedules) {
    const SamplePath p = synthetic::flat_path(1, 4);
    EXPECT_EQ(code_of([&] { discrete_wealth(synthetic::manual_schedule(1, {1}, {1.0}), p, one_asset()); }),
              ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([&] { discrete_wealth(synthetic::manual_schedule(1, {0, 2, 2}, {1, 1, 1}), p, one_asset()); }),
              ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([&] { discrete_wealth(synthetic::manual_schedule(2, {0}, {1, 1}), p, one_asset()); }),
              ErrorCode::InvalidInput);
}
