#include "rebal/cost.hpp"

#include <cmath>
#include <vector>

namespace rebal {

double error_cost(const SamplePath& path, const RebalanceSchedule& schedule) {
    const auto dd = static_cast<std::size_t>(path.d);
    const std::size_t G = path.G;
    double total = 0.0;
    std::size_t j = 0;
    std::vector<double> gap(dd);
    for (std::size_t k = 0; k < G; ++k) {
        while (j + 1 < schedule.stops() && schedule.stop_indices[j + 1] <= k) ++j;
        const double* x = schedule.xi.data() + j * dd;
        const double* h = path.H.row(k);
        for (std::size_t i = 0; i < dd; ++i) gap[i] = h[i] - x[i];
        const double* c = path.price_cov.row(k);
        double quad = 0.0;
        for (std::size_t b = 0; b < dd; ++b) {
            double col = 0.0;
            for (std::size_t a = 0; a < dd; ++a) col += c[b * dd + a] * gap[a];
            quad += gap[b] * col;
        }
        total += path.Q[k] * quad;
    }
    return total * path.dt();
}

namespace {

template <class F>
void for_each_interior_jump(const SamplePath& path, const RebalanceSchedule& schedule, F&& f) {
    const auto dd = static_cast<std::size_t>(schedule.d);
    for (std::size_t j = 1; j < schedule.stops(); ++j) {
        const std::size_t tau = schedule.stop_indices[j];
        if (tau == 0 || tau >= path.G) continue;
        const double* prev = schedule.xi.data() + (j - 1) * dd;
        const double* cur = schedule.xi.data() + j * dd;
        bool moved = false;
        for (std::size_t i = 0; i < dd; ++i) moved = moved || prev[i] != cur[i];
        if (moved) f(tau);
    }
}

} // namespace

double effort_cost(const SamplePath& path, const RebalanceSchedule& schedule) {
    double total = 0.0;
    for_each_interior_jump(path, schedule, [&](std::size_t tau) { total += path.N[tau]; });
    return total;
}

std::size_t rebalance_count(const SamplePath& path, const RebalanceSchedule& schedule) {
    std::size_t count = 0;
    for_each_interior_jump(path, schedule, [&](std::size_t) { ++count; });
    return count;
}

LimitFunctionals limit_functionals(const SamplePath& path) {
    const int d = path.d;
    LimitFunctionals out;
    for (std::size_t k = 0; k < path.G; ++k) {
        const auto L = path.L.mat(k, d);
        const auto J = path.J.mat(k, d);
        const double tr = path.trace_lj[k];
        const double q = path.Q[k];
        const double n = path.N[k];
        double tr_ljlj = 0.0;
        if (d == 1) {
            tr_ljlj = tr * tr;
        } else {
            const Matrix lj = L * J;
            tr_ljlj = (lj * lj).trace();
        }
        out.eff += std::sqrt(n * q) * tr;
        out.equi_q += q * (tr * tr + 2.0 * tr_ljlj);
        out.equi_n += n;
        out.q_trace_sq += q * tr * tr;
        out.count_rate += std::sqrt(q / n) * tr;
    }
    const double dt = path.dt();
    out.eff *= dt;
    out.equi_q *= dt;
    out.equi_n *= dt;
    out.q_trace_sq *= dt;
    out.count_rate *= dt;
    return out;
}

CostReport cost_report(const SamplePath& path, const RebalanceSchedule& schedule, const LimitFunctionals& limits) {
    CostReport r;
    r.q_cost = error_cost(path, schedule);
    r.n_cost = effort_cost(path, schedule);
    r.rebalance_count = rebalance_count(path, schedule);
    r.limits = limits;
    r.epsilon_or_n = schedule.kind == ScheduleKind::Hitting ? schedule.epsilon : static_cast<double>(schedule.n);
    return r;
}

namespace {

struct Moments2 {
    double mean_a, mean_b, var_a, var_b, cov_ab; // variances of the means
};

Moments2 pair_moments(std::span<const CostReport> reports, double (*fa)(const CostReport&),
                      double (*fb)(const CostReport&)) {
    const double n = static_cast<double>(reports.size());
    double sa = 0.0, sb = 0.0;
    for (const auto& r : reports) {
        sa += fa(r);
        sb += fb(r);
    }
    const double ma = sa / n, mb = sb / n;
    double caa = 0.0, cbb = 0.0, cab = 0.0;
    for (const auto& r : reports) {
        const double da = fa(r) - ma, db = fb(r) - mb;
        caa += da * da;
        cbb += db * db;
        cab += da * db;
    }
    // sample (co)variances divided by n: variances of the sample means
    const double denom = (n - 1.0) * n;
    return {ma, mb, caa / denom, cbb / denom, cab / denom};
}

MeanSe product_of_means(const Moments2& m) {
    const double var = m.mean_b * m.mean_b * m.var_a + m.mean_a * m.mean_a * m.var_b + 2.0 * m.mean_a * m.mean_b * m.cov_ab;
    return {m.mean_a * m.mean_b, std::sqrt(std::max(0.0, var))};
}

} // namespace

FrontierSummary frontier_summary(std::span<const CostReport> reports) {
    if (reports.size() < 2) throw Error(ErrorCode::InvalidInput, "frontier_summary needs at least 2 paths");
    FrontierSummary s;
    s.paths = reports.size();

    const Moments2 qn = pair_moments(
        reports, [](const CostReport& r) { return r.q_cost; }, [](const CostReport& r) { return r.n_cost; });
    s.q = {qn.mean_a, std::sqrt(qn.var_a)};
    s.n = {qn.mean_b, std::sqrt(qn.var_b)};
    s.product = product_of_means(qn);

    const Moments2 eff = pair_moments(
        reports, [](const CostReport& r) { return r.limits.eff; }, [](const CostReport& r) { return r.limits.eff; });
    s.bound = product_of_means(eff);

    const Moments2 equi = pair_moments(
        reports, [](const CostReport& r) { return r.limits.equi_q; }, [](const CostReport& r) { return r.limits.equi_n; });
    s.equi_product = product_of_means(equi);

    const Moments2 cs = pair_moments(
        reports, [](const CostReport& r) { return r.limits.equi_n; }, [](const CostReport& r) { return r.limits.q_trace_sq; });
    s.cs_lhs = eff.mean_a * eff.mean_a;
    s.cs_rhs = cs.mean_a * cs.mean_b;
    return s;
}

bool cauchy_schwarz_holds(const FrontierSummary& s) { return s.cs_lhs <= s.cs_rhs * (1.0 + 1e-12); }

} // namespace rebal
