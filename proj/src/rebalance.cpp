#include "rebal/rebalance.hpp"

#include <cmath>
#include <string>

namespace rebal {

namespace {

void check_schedule(const RebalanceSchedule& s, const SamplePath& path) {
    if (s.d != path.d || s.stop_indices.empty() || s.stop_indices.front() != 0 ||
        s.xi.size() != s.stop_indices.size() * static_cast<std::size_t>(s.d)) {
        throw Error(ErrorCode::InvalidInput, "schedule does not match the path");
    }
    for (std::size_t j = 1; j < s.stop_indices.size(); ++j) {
        if (s.stop_indices[j] <= s.stop_indices[j - 1] || s.stop_indices[j] > path.G) {
            throw Error(ErrorCode::InvalidInput, "stop indices must increase within the grid");
        }
    }
}

// One self-financing step of the discrete wealth holding `xi` over (t_k, t_{k+1}].
double wealth_step(double vn, const double* xi, const SamplePath& p, std::size_t k, double consumption) {
    const double* s = p.S.row(k);
    const double* s_next = p.S.row(k + 1);
    double risky_value = 0.0;
    double pnl = 0.0;
    for (int i = 0; i < p.d; ++i) {
        risky_value += xi[i] * s[i];
        pnl += xi[i] * (s_next[i] - s[i]);
    }
    const double bond_growth = (p.S0[k + 1] - p.S0[k]) / p.S0[k];
    const double next = vn + pnl + (vn - risky_value) * bond_growth - consumption * p.V[k] * p.dt();
    if (!(next > 0.0)) {
        throw Error(ErrorCode::Bankruptcy, "discrete wealth reached " + std::to_string(next) + " at node " + std::to_string(k + 1));
    }
    return next;
}

void implementable_shares(const ModelSpec& model, const SamplePath& p, std::size_t k, double vn, double* out) {
    const Vector pi = model.pi(p.time(k));
    const double* s = p.S.row(k);
    for (int i = 0; i < p.d; ++i) out[i] = pi(i) * vn / s[i];
}

} // namespace

double expected_steps_per_rebalance(const SamplePath& path, double epsilon) {
    const double barrier = epsilon * std::sqrt(path.N[0] / path.Q[0]);
    return barrier / (path.trace_lj[0] * path.dt());
}

RebalanceSchedule hitting_schedule(const SamplePath& path, double epsilon, const ModelSpec& model, HittingOptions options) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidInput, "epsilon must be positive");
    const double steps = expected_steps_per_rebalance(path, epsilon);
    if (steps < options.min_steps) {
        throw Error(ErrorCode::GridTooCoarse, "expected " + std::to_string(steps) + " grid steps per rebalance, need " +
                                                  std::to_string(options.min_steps));
    }
    const int d = path.d;
    const std::size_t G = path.G;
    const auto dd = static_cast<std::size_t>(d);
    const bool implementable = options.shares == SharesMode::Implementable;

    RebalanceSchedule s;
    s.kind = ScheduleKind::Hitting;
    s.epsilon = epsilon;
    s.d = d;

    std::vector<double> xi(dd);
    double vn = path.V[0];
    if (implementable) {
        s.vn.assign(G + 1, 0.0);
        s.vn[0] = vn;
        implementable_shares(model, path, 0, vn, xi.data());
    } else {
        std::copy_n(path.H.row(0), dd, xi.begin());
    }
    s.stop_indices.push_back(0);
    s.xi.insert(s.xi.end(), xi.begin(), xi.end());

    const double* l_tau = path.L.row(0);
    double barrier = epsilon * std::sqrt(path.N[0] / path.Q[0]);
    double overshoot_sum = 0.0;
    std::vector<double> diff(dd);

    for (std::size_t k = 0; k < G; ++k) {
        if (implementable) {
            vn = wealth_step(vn, xi.data(), path, k, model.c(path.time(k)));
            s.vn[k + 1] = vn;
        }
        const double* h = path.H.row(k + 1);
        for (std::size_t i = 0; i < dd; ++i) diff[i] = h[i] - xi[i];
        double f = 0.0;
        for (std::size_t j = 0; j < dd; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < dd; ++i) col += l_tau[j * dd + i] * diff[i];
            f += diff[j] * col;
        }
        if (f >= barrier) {
            const double over = f / barrier - 1.0;
            s.max_overshoot = std::max(s.max_overshoot, over);
            overshoot_sum += over;

            const std::size_t tau = k + 1;
            if (implementable) {
                implementable_shares(model, path, tau, vn, xi.data());
            } else {
                std::copy_n(h, dd, xi.begin());
            }
            s.stop_indices.push_back(tau);
            s.xi.insert(s.xi.end(), xi.begin(), xi.end());
            l_tau = path.L.row(tau);
            barrier = epsilon * std::sqrt(path.N[tau] / path.Q[tau]);
        }
    }
    if (s.stops() > 1) s.mean_overshoot = overshoot_sum / static_cast<double>(s.stops() - 1);
    return s;
}

RebalanceSchedule equidistant_schedule(const SamplePath& path, std::size_t n) {
    if (n == 0 || n > path.G || path.G % n != 0) {
        throw Error(ErrorCode::InvalidInput, "equidistant schedule needs n dividing G = " + std::to_string(path.G) +
                                                 ", got n = " + std::to_string(n));
    }
    RebalanceSchedule s;
    s.kind = ScheduleKind::Equidistant;
    s.n = n;
    s.d = path.d;
    const std::size_t stride = path.G / n;
    const auto dd = static_cast<std::size_t>(path.d);
    s.stop_indices.reserve(n);
    s.xi.reserve(n * dd);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = j * stride;
        s.stop_indices.push_back(k);
        s.xi.insert(s.xi.end(), path.H.row(k), path.H.row(k) + dd);
    }
    return s;
}

std::vector<double> discrete_wealth(const RebalanceSchedule& schedule, const SamplePath& path, const ModelSpec& model) {
    check_schedule(schedule, path);
    const auto dd = static_cast<std::size_t>(path.d);
    std::vector<double> vn(path.G + 1);
    vn[0] = path.V[0];
    std::size_t j = 0;
    for (std::size_t k = 0; k < path.G; ++k) {
        while (j + 1 < schedule.stops() && schedule.stop_indices[j + 1] <= k) ++j;
        vn[k + 1] = wealth_step(vn[k], schedule.xi.data() + j * dd, path, k, model.c(path.time(k)));
    }
    return vn;
}

std::vector<double> positions_on_grid(const RebalanceSchedule& schedule, std::size_t G) {
    const auto dd = static_cast<std::size_t>(schedule.d);
    std::vector<double> x((G + 1) * dd);
    std::size_t j = 0;
    for (std::size_t k = 0; k <= G; ++k) {
        while (j + 1 < schedule.stops() && schedule.stop_indices[j + 1] <= k) ++j;
        std::copy_n(schedule.xi.data() + j * dd, dd, x.data() + k * dd);
    }
    return x;
}

} // namespace rebal
