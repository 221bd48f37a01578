#pragma once

#include <cstddef>
#include <vector>

#include "rebal/market.hpp"

namespace rebal {

enum class ScheduleKind { Hitting, Equidistant };
enum class SharesMode { Oracle, Implementable };

/**
 * A simple predictable strategy on a path's grid: position xi_j is held on
 * (t_{tau_j}, t_{tau_{j+1}}], stop_indices[0] == 0.
 */
struct RebalanceSchedule {
    ScheduleKind kind = ScheduleKind::Hitting;
    double epsilon = 0.0;      // 0 for equidistant
    std::size_t n = 0;         // equidistant count, 0 for hitting
    int d = 0;
    std::vector<std::size_t> stop_indices;
    std::vector<double> xi;    // stop_indices.size() x d, row-major
    std::vector<double> vn;    // discrete wealth, filled by the implementable variant
    double max_overshoot = 0.0;  // max_j functional/barrier - 1 at recorded stops
    double mean_overshoot = 0.0;

    std::size_t stops() const noexcept { return stop_indices.size(); }
    Eigen::Map<const Eigen::VectorXd> position(std::size_t j) const {
        return {xi.data() + j * static_cast<std::size_t>(d), d};
    }
};

struct HittingOptions {
    SharesMode shares = SharesMode::Oracle;
    /// Refuse when fewer grid steps per rebalance than this are expected at t = 0.
    double min_steps = 64.0;
};

/// Expected grid steps between rebalances at t = 0: epsilon Q^{-1/2} N^{1/2} / (tr(LJ) dt).
double expected_steps_per_rebalance(const SamplePath& path, double epsilon);

/**
 * Ellipsoid-hitting schedule: rebalance to xi_j at tau_j, then stop at the
 * first grid node where (H - xi_j)^T L_{tau_j} (H - xi_j) reaches
 * epsilon Q_{tau_j}^{-1/2} N_{tau_j}^{1/2}.
 *
 * Oracle shares take xi_j = H_{tau_j}; implementable shares take
 * xi_j = pi(tau_j) V^n_{tau_j} / S_{tau_j} with the discrete wealth V^n
 * carried along and stored in `vn`. Both variants stop on H.
 *
 * Throws GridTooCoarse (see expected_steps_per_rebalance), InvalidInput for
 * epsilon <= 0, Bankruptcy if V^n reaches zero.
 */
RebalanceSchedule hitting_schedule(const SamplePath& path, double epsilon, const ModelSpec& model,
                                   HittingOptions options = {});

/// Stops at j G / n with xi_j = H there. n must divide G.
RebalanceSchedule equidistant_schedule(const SamplePath& path, std::size_t n);

/**
 * Self-financing wealth of the schedule: on each step the risky P&L is
 * xi^T dS, the remainder V^n - xi^T S sits in the bond, and the continuous
 * plan's consumption c V dt is paid. Throws Bankruptcy if V^n <= 0.
 */
std::vector<double> discrete_wealth(const RebalanceSchedule& schedule, const SamplePath& path, const ModelSpec& model);

/// Position held over (t_k, t_{k+1}] for every node k, i.e. after any rebalance at k.
std::vector<double> positions_on_grid(const RebalanceSchedule& schedule, std::size_t G);

} // namespace rebal
