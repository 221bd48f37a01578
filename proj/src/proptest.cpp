#include "rebal/proptest.hpp"

#include <cmath>
#include <sstream>

#include "rebal/config.hpp"
#include "rebal/market.hpp"
#include "rebal/moments.hpp"
#include "rebal/riccati.hpp"

namespace rebal {

Matrix random_orthogonal(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Matrix g(dim, dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(dim, dim);
}

namespace {

double log_uniform(double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

} // namespace

SymMatrix random_spd(int dim, double lo, double hi, std::mt19937_64& rng) {
    const Matrix q = random_orthogonal(dim, rng);
    Vector lambda(dim);
    for (int i = 0; i < dim; ++i) lambda(i) = log_uniform(lo, hi, rng);
    return from_eigen(q, lambda);
}

Matrix random_regular(int dim, double lo, double hi, std::mt19937_64& rng) {
    const Matrix q1 = random_orthogonal(dim, rng);
    const Matrix q2 = random_orthogonal(dim, rng);
    Vector s(dim);
    for (int i = 0; i < dim; ++i) s(i) = log_uniform(lo, hi, rng);
    return q1 * s.asDiagonal() * q2;
}

namespace {

class Tally {
public:
    explicit Tally(PropertyReport& r) : r_(r) {}

    void check(bool ok, std::size_t case_index, const std::string& what) {
        ++r_.checks;
        if (ok) return;
        ++r_.failures;
        if (r_.messages.size() < 10) r_.messages.push_back("case " + std::to_string(case_index) + ": " + what);
    }

private:
    PropertyReport& r_;
};

std::string num(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

double relative(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

void riccati_suite(PropertyReport& rep, std::mt19937_64& rng) {
    Tally tally(rep);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t n = 0; n < rep.cases; ++n) {
        const int d = 1 + static_cast<int>(n % 8);
        const SymMatrix J = random_spd(d, 1e-3, 1e3, rng);
        const Matrix K = random_regular(d, 1e-2, 1e2, rng);
        const Matrix rhs = K.transpose() * J.matrix() * K;
        try {
            const RiccatiSolution sol = solve_ell(J, K);
            const double rel = sol.residual_norm / rhs.norm();
            rep.worst = std::max(rep.worst, rel);
            tally.check(rel <= 1e-10, n, "residual " + num(rel));
            // L = J^{-1/2} M J^{-1/2} resolves its spectrum only to about eps cond(J) ||L||
            const Vector j_eig = sym_eig(J).values;
            const Vector l_eig = sym_eig(sol.L).values;
            const double floor = -64.0 * 2.2e-16 * (j_eig(d - 1) / j_eig(0)) * l_eig(d - 1);
            tally.check(l_eig(0) > floor && sol.trace_LJ > 0.0, n, "L not positive definite");

            double alpha = unit(rng) * 10.0;
            if (std::abs(alpha) < 1e-3) alpha = 0.5;
            const RiccatiSolution scaled = solve_ell(J, alpha * K);
            const double scale_err = relative(scaled.L.matrix(), std::abs(alpha) * sol.L.matrix());
            tally.check(scale_err <= 1e-9, n, "scaling law error " + num(scale_err));

            Matrix dj(d, d), dk(d, d);
            for (int j = 0; j < d; ++j)
                for (int i = 0; i < d; ++i) {
                    dj(i, j) = unit(rng);
                    dk(i, j) = unit(rng);
                }
            const SymMatrix J2 = SymMatrix::symmetrized(J.matrix() + 1e-8 * J.frobenius_norm() / dj.norm() * dj);
            const Matrix K2 = K + 1e-8 * K.norm() / dk.norm() * dk;
            const RiccatiSolution moved = solve_ell(J2, K2);
            const double cont = relative(moved.L.matrix(), sol.L.matrix());
            tally.check(cont <= 1e-5, n, "continuity: L moved " + num(cont));

            const RiccatiSolution iso = solve_ell(SymMatrix::identity(d), K);
            const Matrix ktk = K.transpose() * K;
            const Matrix comm = iso.L.matrix() * ktk - ktk * iso.L.matrix();
            tally.check(comm.norm() <= 1e-9 * iso.L.frobenius_norm() * ktk.norm(), n, "eigenbasis commutator");

            // the reduced scalar function must fall strictly across its bracket
            // c from the factor J^{1/2} K J^{1/2}; assembling C loses the small ones
            const SpdMatrix jr = spd_sqrt(J);
            const Matrix b = jr.matrix() * K * jr.matrix();
            const Vector c = Eigen::JacobiSVD<Matrix>(b).singularValues().array().square().reverse();
            const double hi = 0.5 * c.cwiseSqrt().sum();
            double prev = ell_scalar_g(c, 0.0);
            bool decreasing = prev > 0.0;
            for (int k = 1; k <= 64; ++k) {
                const double g = ell_scalar_g(c, hi * k / 64.0);
                decreasing = decreasing && g < prev;
                prev = g;
            }
            tally.check(decreasing && prev <= 0.0, n, "scalar function not strictly decreasing");
        } catch (const Error& e) {
            tally.check(false, n, e.what());
        }
    }
}

void moments_suite(PropertyReport& rep, std::mt19937_64& rng) {
    Tally tally(rep);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> dims(1, 4);
    std::uniform_int_distribution<int> atoms(2, 8);
    std::uniform_real_distribution<double> mag(-2.0, 1.0);
    double worst = 0.0;
    for (std::size_t n = 0; n < rep.cases; ++n) {
        const int d = dims(rng);
        const DiscreteDistribution dist = random_distribution(d, atoms(rng), rng);
        const MomentTensors m = moment_tensors(dist);
        Vector delta(d);
        for (int i = 0; i < d; ++i) delta(i) = normal(rng) * std::pow(10.0, mag(rng));
        const double dd = delta.squaredNorm();

        const double scale5 = m.fourth + dd * dd;
        const double g5 = pearson_gap(m, delta) / scale5;
        worst = std::min(worst, g5);
        tally.check(g5 >= -1e-12, n, "pearson gap " + num(g5));

        const SymMatrix D = random_spd(d, 1e-3, 1e3, rng);
        const double g6 = mks_gap(m, D) / m.fourth;
        worst = std::min(worst, g6);
        tally.check(g6 >= -1e-12, n, "mks gap " + num(g6));

        if (n % 1000 == 0) {
            const Vector best = pearson_minimizer(m);
            const double g_best = pearson_gap(m, best);
            for (int k = 0; k < 100; ++k) {
                Vector other(d);
                for (int i = 0; i < d; ++i) other(i) = best(i) + normal(rng) * std::pow(10.0, mag(rng));
                const double scale = m.fourth + std::pow(other.squaredNorm(), 2);
                tally.check(g_best <= pearson_gap(m, other) + 1e-12 * scale, n, "minimizer beaten");
            }
            for (const bool symmetric : {true, false}) {
                const double radius = std::pow(10.0, mag(rng));
                const MomentTensors sm = moment_tensors(random_sphere_distribution(d, radius, symmetric, rng));
                const double pg = pearson_gap(sm, pearson_minimizer(sm)) / sm.fourth;
                const double mg = mks_gap(sm, D) / sm.fourth;
                tally.check(std::abs(pg) <= 1e-12, n, "sphere pearson gap " + num(pg));
                tally.check(std::abs(mg) <= 1e-12, n, "sphere mks gap " + num(mg));
            }
        }
    }
    rep.worst = worst;
}

void structure_suite(PropertyReport& rep, std::mt19937_64& rng) {
    Tally tally(rep);
    std::uniform_int_distribution<int> dims(1, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal;
    for (std::size_t n = 0; n < rep.cases; ++n) {
        const int d = dims(rng);
        const SymMatrix Sigma = random_spd(d, 1e-3, 1e-1, rng);
        // weights summing to anything but 1: either below 0.95 or above 1.05
        Vector pi(d);
        for (int i = 0; i < d; ++i) pi(i) = 0.05 + u(rng);
        const double total = (u(rng) < 0.5 ? 0.05 + 0.9 * u(rng) : 1.05 + u(rng));
        pi *= total / pi.sum();
        std::vector<double> S(static_cast<std::size_t>(d));
        for (auto& s : S) s = std::exp(normal(rng));
        const double V = std::exp(normal(rng));
        try {
            const SpdMatrix root = spd_sqrt(Sigma);
            const NodeStructure ns = node_structure(Sigma, root, pi, S, V);
            const Matrix utu = ns.U.transpose() * ns.U;
            tally.check((ns.J.matrix() - utu).norm() <= 1e-10 * ns.J.frobenius_norm(), n, "J != U^T U");
            Vector s(d);
            for (int i = 0; i < d; ++i) s(i) = S[static_cast<std::size_t>(i)];
            const Matrix price = s.asDiagonal() * Sigma.matrix() * s.asDiagonal();
            const double err = relative(ns.K.transpose() * ns.J.matrix() * ns.K, price);
            rep.worst = std::max(rep.worst, err);
            tally.check(err <= 1e-9, n, "K^T J K error " + num(err));
            const RiccatiSolution sol = solve_ell(ns.J, ns.K);
            tally.check(sol.residual_norm <= 1e-10 * price.norm(), n, "Riccati residual at node");
        } catch (const Error& e) {
            tally.check(false, n, e.what());
        }
    }
}

} // namespace

PropertyReport run_property_suite(const std::string& suite, std::uint64_t seed, std::size_t cases) {
    PropertyReport rep;
    rep.suite = suite;
    rep.cases = cases;
    std::mt19937_64 rng = path_engine(PathSeed{seed, fnv1a64(suite)});
    if (suite == "riccati") {
        riccati_suite(rep, rng);
    } else if (suite == "moments") {
        moments_suite(rep, rng);
    } else if (suite == "structure") {
        structure_suite(rep, rng);
    } else {
        throw Error(ErrorCode::InvalidInput, "unknown property suite '" + suite + "' (riccati, moments, structure)");
    }
    return rep;
}

} // namespace rebal
