// Acceptance battery. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Criteria 4-7 share one reference ensemble.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "rebal/config.hpp"
#include "rebal/experiment.hpp"
#include "rebal/moments.hpp"
#include "rebal/riccati.hpp"

using namespace rebal;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string num(double v, const char* f = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int failures = 0;

void report(int id, const char* name, const Outcome& o, double seconds, double budget) {
    const bool in_time = seconds <= budget;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::printf("[%s] %d %s: %s; runtime %.1f s (limit %.0f s)%s\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                seconds, budget, in_time ? "" : " EXCEEDED");
    std::fflush(stdout);
}

SymMatrix sym(const oracle::Mat& m) { return SymMatrix::from_upper(Matrix(m)); }

void riccati_contract() {
    const auto t0 = Clock::now();
    Outcome o;
    auto g = oracle::rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + trial % 8;
        const oracle::Mat J = oracle::spd(d, 1e-3, 1e3, g).m;
        const oracle::Mat K = oracle::regular(d, 1e-2, 1e2, g);
        const RiccatiSolution sol = solve_ell(sym(J), Matrix(K));
        const double rel = oracle::riccati_residual(J, K, sol.L.matrix()) / (K.transpose() * J * K).norm();
        worst = std::max(worst, rel);
    }
    o.require(worst <= 1e-10, "residual");
    o.note("max relative residual " + num(worst));

    double closed = 0.0;
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double j = std::pow(10.0, u(g)), k = std::pow(10.0, u(g)) * (trial % 2 ? -1.0 : 1.0);
        const RiccatiSolution sol = solve_ell(SymMatrix::diagonal(Vector::Constant(1, j)), Matrix::Constant(1, 1, k));
        const double expect = std::abs(k) / std::sqrt(6.0);
        closed = std::max(closed, std::abs(sol.L(0, 0) - expect) / expect);
    }
    for (int d = 1; d <= 8; ++d) {
        for (const double scale : {1e-2, 1.0, 1e2}) {
            const SymMatrix J = SymMatrix::diagonal(Vector::Constant(d, scale));
            const RiccatiSolution sol = solve_ell(J, Matrix::Identity(d, d) * scale);
            const Matrix expect = Matrix::Identity(d, d) * (scale / std::sqrt(2.0 * d + 4.0));
            closed = std::max(closed, (sol.L.matrix() - expect).norm() / expect.norm());
        }
    }
    o.require(closed <= 1e-12, "closed forms");
    o.note("max closed-form deviation " + num(closed));
    report(1, "riccati_contract", o, since(t0), 5.0);
}

void moment_inequalities() {
    const auto t0 = Clock::now();
    Outcome o;
    std::mt19937_64 g(202);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> mag(-2.0, 1.0);
    double worst_pearson = 0.0, worst_mks = 0.0;
    for (int trial = 0; trial < 100000; ++trial) {
        const int d = 1 + trial % 4;
        const MomentTensors m = moment_tensors(random_distribution(d, 2 + trial % 7, g));
        Vector delta(d);
        for (int i = 0; i < d; ++i) delta(i) = n(g) * std::pow(10.0, mag(g));
        const double scale = m.fourth + std::pow(delta.squaredNorm(), 2);
        worst_pearson = std::min(worst_pearson, pearson_gap(m, delta) / scale);
    }
    for (int trial = 0; trial < 100000; ++trial) {
        const int d = 1 + trial % 4;
        const MomentTensors m = moment_tensors(random_distribution(d, 2 + trial % 7, g));
        const SymMatrix D = sym(oracle::spd(d, 1e-3, 1e3, g).m);
        worst_mks = std::min(worst_mks, mks_gap(m, D) / m.fourth);
    }
    o.require(worst_pearson >= -1e-12, "pearson gap");
    o.require(worst_mks >= -1e-12, "mks gap");

    double sphere = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 4;
        const DiscreteDistribution dist = random_sphere_distribution(d, 0.5 + trial % 3, trial % 2 == 0, g);
        const MomentTensors m = moment_tensors(dist);
        sphere = std::max(sphere, std::abs(pearson_gap(m, pearson_minimizer(m))) / m.fourth);
        if (trial % 2 == 1) sphere = std::max(sphere, std::abs(mks_gap(m, sym(oracle::spd(d, 0.1, 10.0, g).m))) / m.fourth);
    }
    o.require(sphere <= 1e-12, "sphere equality");
    o.note("most negative scaled gaps " + num(worst_pearson) + " / " + num(worst_mks) + ", sphere gap " + num(sphere));
    report(2, "fourth_moment_inequalities", o, since(t0), 60.0);
}

void isserlis_identity() {
    const auto t0 = Clock::now();
    Outcome o;
    auto g = oracle::rng(303);
    double exact = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const int d = 1 + trial % 3;
        const oracle::Mat L = oracle::spd(d, 0.1, 10.0, g).m;
        const oracle::Mat J = oracle::spd(d, 0.1, 10.0, g).m;
        const double ref = oracle::isserlis_pairings(L, J);
        exact = std::max(exact, std::abs(isserlis_quartic(sym(L), sym(J)) - ref) / ref);
    }
    o.require(exact <= 1e-12, "pair-partition match");

    std::normal_distribution<double> n;
    double worst_z = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 1 + trial % 4;
        const oracle::Mat L = oracle::spd(d, 0.2, 2.0, g).m;
        const oracle::Mat J = oracle::spd(d, 0.2, 2.0, g).m;
        const oracle::Mat C = Eigen::LLT<oracle::Mat>(J).matrixL();
        constexpr int kSamples = 1000000;
        double s = 0.0, s2 = 0.0;
        oracle::Vec z(d);
        for (int k = 0; k < kSamples; ++k) {
            for (int i = 0; i < d; ++i) z(i) = n(g);
            const oracle::Vec x = C * z;
            const double q = x.dot(L * x);
            s += q * q;
            s2 += q * q * q * q;
        }
        const double mean = s / kSamples;
        const double se = std::sqrt((s2 / kSamples - mean * mean) / kSamples);
        worst_z = std::max(worst_z, std::abs(mean - isserlis_quartic(sym(L), sym(J))) / se);
    }
    o.require(worst_z <= 3.0, "Monte Carlo within 3 SE");
    o.note("max relative oracle deviation " + num(exact) + ", max |z| " + num(worst_z, "%.3f"));
    report(3, "isserlis_identity", o, since(t0), 60.0);
}

double median(std::vector<double> xs) {
    if (xs.empty()) return NAN;
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

std::size_t not_ok(const EnsembleResult& res) {
    std::size_t bad = 0;
    for (const auto& p : res.paths) {
        for (const auto& r : p.runs) bad += r.status != PathStatus::Ok;
    }
    return bad;
}

void structure(const EnsembleResult& res) {
    Outcome o;
    double seconds = 0.0;
    std::size_t count = 0;
    Eigen::Matrix2d qv = Eigen::Matrix2d::Zero(), ij = Eigen::Matrix2d::Zero();
    double kjk = 0.0, resid = 0.0;
    for (const auto& p : res.paths) {
        if (!p.structure.computed) continue;
        ++count;
        seconds += p.build_seconds;
        qv += Eigen::Map<const Eigen::Matrix2d>(p.structure.realized_qv.data());
        ij += Eigen::Map<const Eigen::Matrix2d>(p.structure.integrated_j.data());
        kjk = std::max(kjk, p.structure.max_price_cov_error);
        resid = std::max(resid, p.structure.max_riccati_residual);
    }
    o.require(count == 100, "expected 100 diagnosed paths, got " + std::to_string(count));
    const double rel = (qv - ij).norm() / ij.norm();
    o.require(rel <= 0.05, "quadratic variation");
    o.require(kjk <= 1e-9, "K^T J K identity");
    o.note("ensemble QV vs int J relative Frobenius " + num(rel) + ", max K^T J K error " + num(kjk) +
           ", max Riccati residual " + num(resid));
    report(4, "share_process_structure", o, seconds, 300.0);
}

void hitting_convergence(const EnsembleResult& res, double seconds) {
    Outcome o;
    const auto& eps = res.plan.epsilons;
    std::vector<double> mq, mn;
    for (const double e : eps) {
        std::vector<double> dq, dn;
        for (const auto& r : ok_reports(res, ScheduleKind::Hitting, e)) {
            dq.push_back(std::abs(r.q_cost / e / r.limits.eff - 1.0));
            dn.push_back(std::abs(r.n_cost * e / r.limits.eff - 1.0));
        }
        mq.push_back(median(dq));
        mn.push_back(median(dn));
        o.note("eps " + num(e) + " (mean " + num(mean_rebalances(res, ScheduleKind::Hitting, e), "%.1f") +
               " rebalances): median dev Q " + num(mq.back()) + ", N " + num(mn.back()));
    }
    o.require(!eps.empty() && mq.back() <= 0.10, "Q deviation at finest eps");
    o.require(!eps.empty() && mn.back() <= 0.10, "N deviation at finest eps");
    for (std::size_t i = 1; i < eps.size(); ++i) {
        o.require(mq[i] < mq[i - 1], "Q deviation decreasing at step " + std::to_string(i));
        o.require(mn[i] < mn[i - 1], "N deviation decreasing at step " + std::to_string(i));
    }
    const std::size_t bad = not_ok(res);
    o.require(bad == 0, std::to_string(bad) + " runs excluded");
    report(5, "hitting_convergence", o, seconds, 900.0);
}

void equidistant_convergence(const EnsembleResult& res, double seconds) {
    Outcome o;
    double at512 = NAN;
    for (const std::size_t n : res.plan.ns) {
        std::vector<double> dev;
        for (const auto& r : ok_reports(res, ScheduleKind::Equidistant, static_cast<double>(n))) {
            dev.push_back(std::abs(static_cast<double>(n) * r.q_cost / r.limits.equi_q - 1.0));
        }
        const double m = median(dev);
        if (n == 512) at512 = m;
        o.note("n " + std::to_string(n) + ": median dev " + num(m));
    }
    o.require(at512 <= 0.15, "deviation at n = 512");
    report(6, "equidistant_convergence", o, seconds, 600.0);
}

void frontier(const EnsembleResult& res, double seconds) {
    Outcome o;
    const auto& eps = res.plan.epsilons;
    bool cs = true;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const auto hit = ok_reports(res, ScheduleKind::Hitting, eps[i]);
        const FrontierSummary s = frontier_summary(hit);
        const std::size_t n = matched_equidistant_n(res, eps[i]);
        const FrontierSummary e = frontier_summary(ok_reports(res, ScheduleKind::Equidistant, static_cast<double>(n)));
        cs = cs && cauchy_schwarz_holds(s) && cauchy_schwarz_holds(e);
        const double bound = s.bound.mean;
        const double se = std::hypot(s.product.se, s.bound.se);
        o.note("eps " + num(eps[i]) + ": product/bound " + num(s.product.mean / bound) + " (2 SE " + num(2 * se / bound) +
               "), matched n " + std::to_string(n) + " product/bound " + num(e.product.mean / bound));
        o.require(e.product.mean >= s.product.mean, "matched equidistant product below efficient at eps " + num(eps[i]));
        if (i + 1 == eps.size()) {
            const double lo = bound - 2.0 * se;
            const double hi = bound + std::max(0.10 * bound, 2.0 * se);
            o.require(s.product.mean >= lo && s.product.mean <= hi, "efficient product outside bound window");
        }
    }
    o.require(cs, "Cauchy-Schwarz");
    report(7, "frontier_bound", o, seconds, 900.0);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string replace_line(std::string text, const std::string& key, const std::string& value) {
    const std::size_t at = text.find(key + " =");
    const std::size_t end = text.find('\n', at);
    return text.replace(at, end - at, key + " = " + value);
}

void determinism(const std::string& reference_text, unsigned workers) {
    const auto t0 = Clock::now();
    Outcome o;
    std::string text = replace_line(reference_text, "grid.G", "65536");
    text = replace_line(text, "run.paths", "8");
    text = replace_line(text, "strategy.pilot_paths", "4");
    text = replace_line(text, "strategy.target_rebalances", "16, 64, 256");
    const ExperimentConfig cfg = parse_config(text, "reduced reference");
    const unsigned many = std::max(3u, workers);
    const std::string c1 = run_convergence(cfg, 1), c3 = run_convergence(cfg, many);
    const std::string f1 = run_frontier(cfg, 1), f3 = run_frontier(cfg, many);
    o.require(c1 == c3, "convergence CSV differs");
    o.require(f1 == f3, "frontier CSV differs");
    o.note("G = 65536, 8 paths, workers 1 vs " + std::to_string(many) + ", " + std::to_string(c1.size() + f1.size()) +
           " bytes compared");
    report(8, "determinism", o, since(t0), 900.0);
}

} // namespace

int main() {
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::printf("acceptance: %u worker(s)\n", workers);
    std::fflush(stdout);

    riccati_contract();
    moment_inequalities();
    isserlis_identity();

    const std::string ref_path = std::string(REBAL_SOURCE_DIR) + "/configs/reference.conf";
    const std::string ref_text = read_file(ref_path);
    const ExperimentConfig cfg = parse_config(ref_text, ref_path);
    std::printf("reference ensemble: config %s, %zu paths, G = %zu\n", cfg.hash_hex().c_str(), cfg.paths, cfg.grid_G);
    std::fflush(stdout);

    const auto t_plan = Clock::now();
    const EnsemblePlan plan = make_plan(cfg, workers);
    const double plan_seconds = since(t_plan);

    // two slices: the first carries the structure diagnostics
    const auto t_run = Clock::now();
    const std::size_t half = cfg.paths / 2;
    EnsembleResult res = run_ensemble(cfg, plan, {.workers = workers, .structure_paths = 100, .paths = half});
    res.append(run_ensemble(cfg, plan, {.workers = workers, .paths = cfg.paths - half, .first_path = half}));
    const double run_seconds = since(t_run);
    std::printf("ensemble done: pilot %.1f s, paths %.1f s\n", plan_seconds, run_seconds);

    std::ofstream("acceptance_convergence.csv") << convergence_csv(cfg, res);
    std::ofstream("acceptance_frontier.csv") << frontier_csv(cfg, res);

    structure(res);
    hitting_convergence(res, plan_seconds + run_seconds);
    equidistant_convergence(res, run_seconds);
    frontier(res, plan_seconds + run_seconds);
    determinism(ref_text, workers);

    std::printf("acceptance: %d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
