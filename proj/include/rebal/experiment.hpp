#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "rebal/config.hpp"
#include "rebal/cost.hpp"

namespace rebal {

enum class PathStatus { Ok, GridTooCoarse, Bankruptcy, NumericalFailure };

std::string_view to_string(PathStatus status) noexcept;

/// One (strategy, parameter, path) evaluation.
struct RunRecord {
    ScheduleKind kind = ScheduleKind::Hitting;
    double param = 0.0; // epsilon or n
    bool scheduled = true; // false for equidistant runs added only for effort matching
    std::size_t path_id = 0;
    PathStatus status = PathStatus::Ok;
    CostReport report;
    double overshoot = 0.0; // max relative overshoot of the hitting functional
    std::string detail;     // error message when status != Ok
};

/// Checks of d<H,H> = J dt and K^T J K = diag(S) Sigma diag(S) on one path.
struct StructureDiagnostics {
    bool computed = false;
    std::vector<double> realized_qv;  // sum_k dH dH^T, d*d column-major
    std::vector<double> integrated_j; // sum_k J_k dt
    double max_price_cov_error = 0.0; // max_k ||K^T J K - diag(S) Sigma diag(S)||_F / ||diag(S) Sigma diag(S)||_F
    double max_riccati_residual = 0.0;
};

struct PathOutcome {
    std::size_t path_id = 0;
    PathStatus status = PathStatus::Ok; // of the path itself (simulation, structure, Riccati)
    std::string detail;
    LimitFunctionals limits;
    StructureDiagnostics structure;
    double build_seconds = 0.0; // wall time of simulation, structure and diagnostics
    std::vector<RunRecord> runs;
};

/// Schedule parameters of one ensemble.
struct EnsemblePlan {
    std::vector<double> epsilons;
    std::vector<std::size_t> ns;         // from the config
    std::vector<std::size_t> matched_ns; // extra equidistant counts tried for effort matching
    double pilot_count_rate = 0.0;       // see pilot_count_rate(), 0 when no pilot ran
};

struct EnsembleOptions {
    unsigned workers = 1;
    /// Structure diagnostics for paths with id below this.
    std::size_t structure_paths = 0;
    /// Override of config.paths when nonzero.
    std::size_t paths = 0;
    /// Id of the first path; a slice [first_path, first_path + paths) of a larger ensemble.
    std::size_t first_path = 0;
};

struct EnsembleResult {
    EnsemblePlan plan;
    std::vector<PathOutcome> paths; // in path-id order

    /// Appends the paths of another slice run with the same plan.
    void append(EnsembleResult&& other);
};

/// Runs fn(0) .. fn(count - 1) on `workers` threads. The first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);

/**
 * Mean of int Q^{1/2} N^{-1/2} tr(LJ) dt over pilot paths on the pilot grid.
 * A hitting run with epsilon rebalances about this many times over epsilon.
 * Pilot paths use a stream separate from the main ensemble.
 */
double pilot_count_rate(const ExperimentConfig& config, unsigned workers);

/// Epsilons (explicit or calibrated to the rebalance targets), equidistant counts
/// and, with frontier.match_effort, power-of-two counts bracketing each hitting run's effort.
EnsemblePlan make_plan(const ExperimentConfig& config, unsigned workers);

EnsembleResult run_ensemble(const ExperimentConfig& config, const EnsemblePlan& plan, EnsembleOptions options);

/// Records of one (kind, param) in path order, Ok ones only.
std::vector<CostReport> ok_reports(const EnsembleResult& result, ScheduleKind kind, double param);

/// Mean rebalance count over Ok records of one (kind, param).
double mean_rebalances(const EnsembleResult& result, ScheduleKind kind, double param);

/// Equidistant n whose n - 1 interior rebalances is closest to the hitting run's mean count.
std::size_t matched_equidistant_n(const EnsembleResult& result, double epsilon);

/// Per-path CSV, one row per scheduled (strategy, param, path).
std::string convergence_csv(const ExperimentConfig& config, const EnsembleResult& result);

/// Aggregate CSV: one row per strategy parameter plus effort-matched equidistant rows.
std::string frontier_csv(const ExperimentConfig& config, const EnsembleResult& result);

std::string run_convergence(const ExperimentConfig& config, unsigned workers);
std::string run_frontier(const ExperimentConfig& config, unsigned workers);

} // namespace rebal
