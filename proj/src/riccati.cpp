#include "rebal/riccati.hpp"

#include <cmath>
#include <string>

namespace rebal {

namespace {

// (-t + sqrt(t^2 + 4c)) / 4 without cancellation for t^2 >> c.
inline double reduced_eigenvalue(double c, double t) { return c / (t + std::sqrt(t * t + 4.0 * c)); }

inline double reduced_eigenvalue_dt(double c, double t) {
    return 0.25 * (-1.0 + t / std::sqrt(t * t + 4.0 * c));
}

double g_prime(const Vector& c, double t) {
    double s = -1.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) s += reduced_eigenvalue_dt(c(i), t);
    return s;
}

double residual_of(const SymMatrix& J, const SymMatrix& rhs, const SymMatrix& L) {
    const Matrix LJ = L.matrix() * J.matrix();
    const Matrix lhs = 2.0 * LJ.trace() * L.matrix() + 4.0 * LJ * L.matrix();
    return (lhs - rhs.matrix()).norm();
}

} // namespace

double ell_scalar_g(const Vector& c, double t) {
    double s = -t;
    for (Eigen::Index i = 0; i < c.size(); ++i) s += reduced_eigenvalue(c(i), t);
    return s;
}

namespace {

// Below this ratio of smallest to largest eigenvalue the assembled C loses
// its small eigenvalues to rounding; they are then taken from a factor.
constexpr double kReducedConditionLimit = 1e-8;

// Eigenpairs of C = B^T B from the singular values of B, ascending.
SymEig eig_from_factor(const Matrix& B) {
    Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeFullV);
    const auto n = B.cols();
    SymEig e;
    e.values.resize(n);
    e.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = svd.singularValues()(n - 1 - i);
        e.values(i) = s * s;
        e.vectors.col(i) = svd.matrixV().col(n - 1 - i);
    }
    return e;
}

template <class Factor>
RiccatiSolution solve_reduced(const SymMatrix& J, const SpdRoots& roots, const SymMatrix& rhs, Factor&& factor) {
    const Matrix c_full = roots.sqrt.matrix() * rhs.matrix() * roots.sqrt.matrix();
    SymEig ce = sym_eig(SymMatrix::symmetrized(c_full));
    if (!(ce.values(0) > kReducedConditionLimit * ce.values(ce.values.size() - 1))) ce = eig_from_factor(factor());
    const Vector& c = ce.values;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (!(c(i) > 0.0)) throw Error(ErrorCode::NumericalFailure, "reduced right-hand side is not positive definite");
    }

    double lo = 0.0;
    double hi = 0.5 * c.cwiseSqrt().sum();
    const double g_lo = ell_scalar_g(c, lo);
    const double g_hi = ell_scalar_g(c, hi);
    if (!(g_lo > 0.0) || !(g_hi <= 0.0)) {
        throw Error(ErrorCode::NumericalFailure, "scalar Riccati equation not bracketed");
    }
    const double width = 1e-14 * hi;
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        if (ell_scalar_g(c, mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double t = 0.5 * (lo + hi);
    for (int k = 0; k < 2; ++k) {
        const double next = t - ell_scalar_g(c, t) / g_prime(c, t);
        if (std::isfinite(next) && next > 0.0) t = next;
    }

    Vector m(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) m(i) = reduced_eigenvalue(c(i), t);
    const SymMatrix M = from_eigen(ce.vectors, m);
    const Matrix l_full = roots.inv_sqrt.matrix() * M.matrix() * roots.inv_sqrt.matrix();

    RiccatiSolution sol;
    sol.L = SpdMatrix::trusted(SymMatrix::symmetrized(l_full));
    sol.scalar_root = t;
    sol.trace_LJ = (sol.L.matrix() * J.matrix()).trace();
    sol.residual_norm = residual_of(J, rhs, sol.L);
    const double tol = 1e-10 * rhs.frobenius_norm();
    if (!(sol.residual_norm <= tol)) {
        throw Error(ErrorCode::NumericalFailure,
                    "Riccati residual " + std::to_string(sol.residual_norm) + " exceeds " + std::to_string(tol));
    }
    return sol;
}

} // namespace

RiccatiSolution solve_ell_rhs(const SymMatrix& J, const SymMatrix& rhs) {
    if (J.dim() != rhs.dim()) throw Error(ErrorCode::InvalidInput, "solve_ell: J and K^T J K shapes differ");
    const SpdRoots roots = spd_roots(J);
    // rhs = R^T R gives C = (R J^{1/2})^T (R J^{1/2})
    return solve_reduced(J, roots, rhs, [&] {
        Eigen::LLT<Matrix> llt(rhs.matrix());
        if (llt.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "K^T J K is not positive definite");
        const Matrix R = llt.matrixU();
        return Matrix(R * roots.sqrt.matrix());
    });
}

RiccatiSolution solve_ell(const SymMatrix& J, const Matrix& K) {
    if (K.rows() != J.dim() || K.cols() != J.dim()) throw Error(ErrorCode::InvalidInput, "solve_ell: K shape mismatch");
    if (!K.allFinite()) throw Error(ErrorCode::InvalidMatrix, "K has non-finite entries");
    const double kn = K.norm();
    if (!(min_singular_value(K) >= 1e-12 * kn) || kn == 0.0) throw Error(ErrorCode::SingularK, "K is singular");
    const SpdRoots roots = spd_roots(J);
    const SymMatrix rhs = SymMatrix::symmetrized(K.transpose() * J.matrix() * K);
    // C = B^T B with B = J^{1/2} K J^{1/2}
    return solve_reduced(J, roots, rhs, [&] { return Matrix(roots.sqrt.matrix() * K * roots.sqrt.matrix()); });
}

double ell_residual(const SymMatrix& J, const Matrix& K, const SymMatrix& L) {
    const int d = J.dim();
    if (L.dim() != d || K.rows() != d || K.cols() != d) throw Error(ErrorCode::InvalidInput, "ell_residual: shape mismatch");
    const Matrix rhs = K.transpose() * J.matrix() * K;
    return residual_of(J, SymMatrix::symmetrized(rhs), L);
}

} // namespace rebal
