#include "rebal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace rebal {

std::string_view to_string(PathStatus status) noexcept {
    switch (status) {
    case PathStatus::Ok: return "ok";
    case PathStatus::GridTooCoarse: return "grid_too_coarse";
    case PathStatus::Bankruptcy: return "bankruptcy";
    case PathStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || stop.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
                stop = true;
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first) std::rethrow_exception(first);
}

namespace {

// Pilot paths draw from their own stream so they never coincide with ensemble paths.
std::uint64_t pilot_master(std::uint64_t master) { return mix64(master ^ 0x70696c6f74ULL); }

std::size_t floor_pow2(double x) {
    std::size_t p = 1;
    while (static_cast<double>(p * 2) <= x) p *= 2;
    return p;
}

StructureDiagnostics structure_diagnostics(const SamplePath& p) {
    const int d = p.d;
    const auto dd = static_cast<std::size_t>(d * d);
    StructureDiagnostics s;
    s.computed = true;
    s.realized_qv.assign(dd, 0.0);
    s.integrated_j.assign(dd, 0.0);
    const double dt = p.dt();
    for (std::size_t k = 0; k < p.G; ++k) {
        const double* h0 = p.H.row(k);
        const double* h1 = p.H.row(k + 1);
        const double* j = p.J.row(k);
        for (int b = 0; b < d; ++b) {
            for (int a = 0; a < d; ++a) {
                const auto idx = static_cast<std::size_t>(b * d + a);
                s.realized_qv[idx] += (h1[a] - h0[a]) * (h1[b] - h0[b]);
                s.integrated_j[idx] += j[idx] * dt;
            }
        }
    }
    for (std::size_t k = 0; k <= p.G; ++k) {
        const Matrix K = p.K.mat(k, d);
        const Matrix kjk = K.transpose() * p.J.mat(k, d) * K;
        const auto target = p.price_cov.mat(k, d);
        s.max_price_cov_error = std::max(s.max_price_cov_error, (kjk - target).norm() / target.norm());
    }
    s.max_riccati_residual = p.max_riccati_residual;
    return s;
}

PathStatus status_of(const Error& e) {
    switch (e.code()) {
    case ErrorCode::GridTooCoarse: return PathStatus::GridTooCoarse;
    case ErrorCode::Bankruptcy: return PathStatus::Bankruptcy;
    default: return PathStatus::NumericalFailure;
    }
}

PathOutcome run_path(const ExperimentConfig& cfg, const EnsemblePlan& plan, std::size_t id, bool diagnostics) {
    PathOutcome out;
    out.path_id = id;
    SamplePath path;
    const auto start = std::chrono::steady_clock::now();
    try {
        path = build_sample_path(cfg.model, cfg.grid_G, PathSeed{cfg.master_seed, id});
        out.limits = limit_functionals(path);
        if (diagnostics) out.structure = structure_diagnostics(path);
        out.build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        out.status = PathStatus::NumericalFailure;
        out.detail = e.what();
    }

    auto add = [&](ScheduleKind kind, double param, bool scheduled, auto&& make) {
        RunRecord rec;
        rec.kind = kind;
        rec.param = param;
        rec.scheduled = scheduled;
        rec.path_id = id;
        if (out.status != PathStatus::Ok) {
            rec.status = out.status;
            rec.detail = out.detail;
        } else {
            try {
                const RebalanceSchedule s = make();
                rec.report = cost_report(path, s, out.limits);
                rec.overshoot = s.max_overshoot;
            } catch (const Error& e) {
                rec.status = status_of(e);
                rec.detail = e.what();
            }
        }
        out.runs.push_back(std::move(rec));
    };

    const HittingOptions hopts{cfg.shares, cfg.min_steps};
    for (const double eps : plan.epsilons) {
        add(ScheduleKind::Hitting, eps, true, [&] { return hitting_schedule(path, eps, cfg.model, hopts); });
    }
    for (const std::size_t n : plan.ns) {
        add(ScheduleKind::Equidistant, static_cast<double>(n), true, [&] { return equidistant_schedule(path, n); });
    }
    for (const std::size_t n : plan.matched_ns) {
        add(ScheduleKind::Equidistant, static_cast<double>(n), false, [&] { return equidistant_schedule(path, n); });
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string_view strategy_name(ScheduleKind kind) { return kind == ScheduleKind::Hitting ? "hitting" : "equidistant"; }

} // namespace

double pilot_count_rate(const ExperimentConfig& config, unsigned workers) {
    std::vector<double> rates(config.pilot_paths);
    const std::uint64_t master = pilot_master(config.master_seed);
    parallel_for(config.pilot_paths, workers, [&](std::size_t i) {
        const SamplePath p = build_sample_path(config.model, config.pilot_G, PathSeed{master, i});
        rates[i] = limit_functionals(p).count_rate;
    });
    double sum = 0.0;
    for (const double r : rates) sum += r;
    return sum / static_cast<double>(rates.size());
}

EnsemblePlan make_plan(const ExperimentConfig& config, unsigned workers) {
    EnsemblePlan plan;
    plan.ns = config.runs_equidistant() ? config.n_schedule : std::vector<std::size_t>{};
    if (!config.runs_hitting()) return plan;

    const bool need_pilot = !config.target_rebalances.empty() || (config.match_effort && config.runs_equidistant());
    if (need_pilot) plan.pilot_count_rate = pilot_count_rate(config, workers);

    if (config.target_rebalances.empty()) {
        plan.epsilons = config.epsilon_schedule;
    } else {
        for (const double target : config.target_rebalances) plan.epsilons.push_back(plan.pilot_count_rate / target);
    }

    if (config.match_effort && config.runs_equidistant()) {
        for (const double eps : plan.epsilons) {
            // n stops give n - 1 interior rebalances
            const double predicted = plan.pilot_count_rate / eps + 1.0;
            const std::size_t lo = floor_pow2(predicted);
            for (const std::size_t n : {lo, lo * 2}) {
                if (n > config.grid_G || config.grid_G % n != 0) continue;
                if (std::find(plan.ns.begin(), plan.ns.end(), n) != plan.ns.end()) continue;
                if (std::find(plan.matched_ns.begin(), plan.matched_ns.end(), n) != plan.matched_ns.end()) continue;
                plan.matched_ns.push_back(n);
            }
        }
        std::sort(plan.matched_ns.begin(), plan.matched_ns.end());
    }
    return plan;
}

EnsembleResult run_ensemble(const ExperimentConfig& config, const EnsemblePlan& plan, EnsembleOptions options) {
    const std::size_t paths = options.paths > 0 ? options.paths : config.paths;
    EnsembleResult result;
    result.plan = plan;
    result.paths.resize(paths);
    parallel_for(paths, options.workers, [&](std::size_t i) {
        const std::size_t id = options.first_path + i;
        result.paths[i] = run_path(config, plan, id, id < options.structure_paths);
    });
    return result;
}

void EnsembleResult::append(EnsembleResult&& other) {
    for (auto& p : other.paths) paths.push_back(std::move(p));
}

std::vector<CostReport> ok_reports(const EnsembleResult& result, ScheduleKind kind, double param) {
    std::vector<CostReport> out;
    for (const auto& p : result.paths) {
        for (const auto& r : p.runs) {
            if (r.kind == kind && r.param == param && r.status == PathStatus::Ok) out.push_back(r.report);
        }
    }
    return out;
}

double mean_rebalances(const EnsembleResult& result, ScheduleKind kind, double param) {
    const auto reports = ok_reports(result, kind, param);
    if (reports.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : reports) sum += static_cast<double>(r.rebalance_count);
    return sum / static_cast<double>(reports.size());
}

std::size_t matched_equidistant_n(const EnsembleResult& result, double epsilon) {
    const double effort = mean_rebalances(result, ScheduleKind::Hitting, epsilon);
    std::vector<std::size_t> candidates = result.plan.ns;
    candidates.insert(candidates.end(), result.plan.matched_ns.begin(), result.plan.matched_ns.end());
    std::size_t best = 0;
    double best_gap = 0.0;
    for (const std::size_t n : candidates) {
        const double gap = std::abs(static_cast<double>(n) - 1.0 - effort);
        if (best == 0 || gap < best_gap || (gap == best_gap && n < best)) {
            best = n;
            best_gap = gap;
        }
    }
    if (best == 0) throw Error(ErrorCode::InvalidInput, "no equidistant run available for effort matching");
    return best;
}

std::string convergence_csv(const ExperimentConfig& config, const EnsembleResult& result) {
    const std::string hash = config.hash_hex();
    std::string out =
        "config_hash,strategy,param,path_id,status,q_cost,n_cost,scaled_q,scaled_n,limit_eff,limit_equi_q,"
        "limit_equi_n,rebalance_count,overshoot_diag\n";
    auto emit = [&](ScheduleKind kind, double param) {
        for (const auto& p : result.paths) {
            for (const auto& r : p.runs) {
                if (r.kind != kind || r.param != param || !r.scheduled) continue;
                out += hash;
                out += ',';
                out += strategy_name(kind);
                out += ',' + fmt(param) + ',' + std::to_string(r.path_id) + ',';
                out += to_string(r.status);
                if (r.status != PathStatus::Ok) {
                    out += ",,,,,,,,,\n";
                    continue;
                }
                const CostReport& c = r.report;
                const bool hit = kind == ScheduleKind::Hitting;
                // hitting: q / eps and eps N -> limit_eff; equidistant: n q -> limit_equi_q and N / n -> limit_equi_n
                const double scaled_q = hit ? c.q_cost / param : c.q_cost * param;
                const double scaled_n = hit ? c.n_cost * param : c.n_cost / param;
                out += ',' + fmt(c.q_cost) + ',' + fmt(c.n_cost) + ',' + fmt(scaled_q) + ',' + fmt(scaled_n) + ',' +
                       fmt(c.limits.eff) + ',' + fmt(c.limits.equi_q) + ',' + fmt(c.limits.equi_n) + ',' +
                       std::to_string(c.rebalance_count) + ',' + (hit ? fmt(r.overshoot) : std::string()) + '\n';
            }
        }
    };
    for (const double eps : result.plan.epsilons) emit(ScheduleKind::Hitting, eps);
    for (const std::size_t n : result.plan.ns) emit(ScheduleKind::Equidistant, static_cast<double>(n));
    return out;
}

std::string frontier_csv(const ExperimentConfig& config, const EnsembleResult& result) {
    const std::string hash = config.hash_hex();
    std::string out =
        "config_hash,strategy,param,matched_epsilon,paths_ok,paths_excluded,mean_rebalances,mean_q,se_q,mean_n,se_n,"
        "product,se_product,bound_estimate,se_bound,equi_product_limit,se_equi_product,product_over_bound,"
        "cauchy_schwarz\n";
    const std::size_t total = result.paths.size();
    auto emit = [&](std::string_view name, ScheduleKind kind, double param, const std::string& matched) {
        const auto reports = ok_reports(result, kind, param);
        if (reports.size() < 2) {
            // too few usable paths for standard errors
            out += hash + ',' + std::string(name) + ',' + fmt(param) + ',' + matched + ',' +
                   std::to_string(reports.size()) + ',' + std::to_string(total - reports.size()) + ",,,,,,,,,,,,,\n";
            return;
        }
        const FrontierSummary s = frontier_summary(reports);
        out += hash + ',' + std::string(name) + ',' + fmt(param) + ',' + matched + ',' + std::to_string(s.paths) + ',' +
               std::to_string(total - s.paths) + ',' + fmt(mean_rebalances(result, kind, param)) + ',' + fmt(s.q.mean) +
               ',' + fmt(s.q.se) + ',' + fmt(s.n.mean) + ',' + fmt(s.n.se) + ',' + fmt(s.product.mean) + ',' +
               fmt(s.product.se) + ',' + fmt(s.bound.mean) + ',' + fmt(s.bound.se) + ',' + fmt(s.equi_product.mean) +
               ',' + fmt(s.equi_product.se) + ',' + fmt(s.product.mean / s.bound.mean) + ',' +
               (cauchy_schwarz_holds(s) ? "true" : "false") + '\n';
    };
    for (const double eps : result.plan.epsilons) emit("hitting", ScheduleKind::Hitting, eps, "");
    for (const std::size_t n : result.plan.ns) emit("equidistant", ScheduleKind::Equidistant, static_cast<double>(n), "");
    if (config.match_effort && config.runs_hitting() && config.runs_equidistant()) {
        for (const double eps : result.plan.epsilons) {
            const std::size_t n = matched_equidistant_n(result, eps);
            emit("equidistant_matched", ScheduleKind::Equidistant, static_cast<double>(n), fmt(eps));
        }
    }
    return out;
}

std::string run_convergence(const ExperimentConfig& config, unsigned workers) {
    const EnsemblePlan plan = make_plan(config, workers);
    return convergence_csv(config, run_ensemble(config, plan, {workers, 0, 0}));
}

std::string run_frontier(const ExperimentConfig& config, unsigned workers) {
    if (config.strategy != StrategyKind::Both) {
        throw Error(ErrorCode::ConfigError, "frontier runs need strategy.kind = both");
    }
    const EnsemblePlan plan = make_plan(config, workers);
    return frontier_csv(config, run_ensemble(config, plan, {workers, 0, 0}));
}

} // namespace rebal
