#pragma once

#include <cstddef>
#include <span>

#include "rebal/rebalance.hpp"

namespace rebal {

/// Pathwise limits on the path's grid (left-point sums).
struct LimitFunctionals {
    double eff = 0.0;        // int N^{1/2} Q^{1/2} tr(LJ) dt
    double equi_q = 0.0;     // int Q (tr(LJ)^2 + 2 tr(LJLJ)) dt
    double equi_n = 0.0;     // int N dt
    double q_trace_sq = 0.0; // int Q tr(LJ)^2 dt
    double count_rate = 0.0; // int Q^{1/2} N^{-1/2} tr(LJ) dt, the rebalance count times epsilon
};

struct CostReport {
    double q_cost = 0.0;
    double n_cost = 0.0;
    LimitFunctionals limits;
    std::size_t rebalance_count = 0;
    double epsilon_or_n = 0.0;
};

/// sum_k Q_k (H_k - X_k)^T diag(S_k) Sigma_k diag(S_k) (H_k - X_k) dt, X_k the position held on (t_k, t_{k+1}].
double error_cost(const SamplePath& path, const RebalanceSchedule& schedule);

/// sum of N at stops in (0, 1) where the position changes.
double effort_cost(const SamplePath& path, const RebalanceSchedule& schedule);

/// Number of stops in (0, 1) where the position changes.
std::size_t rebalance_count(const SamplePath& path, const RebalanceSchedule& schedule);

LimitFunctionals limit_functionals(const SamplePath& path);

CostReport cost_report(const SamplePath& path, const RebalanceSchedule& schedule, const LimitFunctionals& limits);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/**
 * Ensemble aggregates. Products of means carry first-order delta-method
 * standard errors that include the sample covariance of the two factors.
 */
struct FrontierSummary {
    std::size_t paths = 0;
    MeanSe q;
    MeanSe n;
    MeanSe product;          // mean(q) mean(n)
    MeanSe bound;            // mean(limit_eff)^2
    MeanSe equi_product;     // mean(limit_equi_q) mean(limit_equi_n)
    double cs_lhs = 0.0;     // mean(limit_eff)^2
    double cs_rhs = 0.0;     // mean(limit_equi_n) mean(int Q tr(LJ)^2 dt)
};

/// Throws InvalidInput for fewer than 2 reports.
FrontierSummary frontier_summary(std::span<const CostReport> reports);

/// mean(limit_eff)^2 <= mean(limit_equi_n) mean(q_trace_sq), up to 1e-12 relative rounding.
bool cauchy_schwarz_holds(const FrontierSummary& s);

} // namespace rebal
