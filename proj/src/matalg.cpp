#include "rebal/matalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rebal {

void SymMatrix::check_shape(Eigen::Index rows, Eigen::Index cols) {
    if (rows != cols || rows < 1 || rows > kMaxDim) {
        throw Error(ErrorCode::InvalidInput,
                    "symmetric matrix must be square with 1 <= dim <= " + std::to_string(kMaxDim) + ", got " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
}

SymMatrix SymMatrix::zero(int dim) {
    check_shape(dim, dim);
    SymMatrix s;
    s.m_ = Matrix::Zero(dim, dim);
    return s;
}

SymMatrix SymMatrix::identity(int dim) {
    check_shape(dim, dim);
    SymMatrix s;
    s.m_ = Matrix::Identity(dim, dim);
    return s;
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
    const auto n = static_cast<int>(diag.size());
    check_shape(n, n);
    SymMatrix s;
    s.m_ = Matrix::Zero(n, n);
    s.m_.diagonal() = diag;
    return s;
}

double eig_floor(const SymMatrix& s) { return 1e-12 * std::max(1.0, s.frobenius_norm()); }

SpdMatrix SpdMatrix::checked(const SymMatrix& s) {
    const SymEig e = sym_eig(s);
    const double floor = eig_floor(s);
    if (e.values(0) < floor) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    "smallest eigenvalue " + std::to_string(e.values(0)) + " below floor " + std::to_string(floor));
    }
    return SpdMatrix(s);
}

namespace {

// Jacobi rotation for [[a, b], [b, c]].
SymEig eig2(double a, double b, double c) {
    SymEig e;
    e.values.resize(2);
    e.vectors.resize(2, 2);
    if (b == 0.0) {
        e.values << a, c;
        e.vectors.setIdentity();
    } else {
        const double tau = (c - a) / (2.0 * b);
        const double at = std::abs(tau);
        // smaller root of t^2 + 2 tau t - 1 = 0
        const double t_abs = at < 1e150 ? 1.0 / (at + std::sqrt(1.0 + at * at)) : 0.5 / at;
        const double t = tau >= 0.0 ? t_abs : -t_abs;
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * cs;
        e.values << a - t * b, c + t * b;
        e.vectors << cs, sn, -sn, cs;
    }
    if (e.values(0) > e.values(1)) {
        std::swap(e.values(0), e.values(1));
        e.vectors.col(0).swap(e.vectors.col(1));
    }
    return e;
}

} // namespace

SymEig sym_eig(const SymMatrix& s) {
    if (!s.all_finite()) throw Error(ErrorCode::InvalidMatrix, "non-finite entries");
    const int n = s.dim();
    if (n == 1) {
        SymEig e;
        e.values = Vector::Constant(1, s(0, 0));
        e.vectors = Matrix::Identity(1, 1);
        return e;
    }
    if (n == 2) return eig2(s(0, 0), s(0, 1), s(1, 1));

    Eigen::SelfAdjointEigenSolver<Matrix> solver(s.matrix());
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

SymMatrix from_eigen(const Matrix& vectors, const Vector& values) {
    const auto n = values.size();
    Matrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            double v = 0.0;
            for (Eigen::Index k = 0; k < n; ++k) v += vectors(i, k) * values(k) * vectors(j, k);
            m(i, j) = v;
        }
    }
    return SymMatrix::from_upper(m);
}

namespace {

SymEig checked_eig(const SymMatrix& s) {
    SymEig e = sym_eig(s);
    const double floor = eig_floor(s);
    if (e.values(0) < floor) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    "smallest eigenvalue " + std::to_string(e.values(0)) + " below floor " + std::to_string(floor));
    }
    return e;
}

} // namespace

SpdMatrix spd_sqrt(const SymMatrix& s) {
    const SymEig e = checked_eig(s);
    return SpdMatrix::trusted(from_eigen(e.vectors, e.values.cwiseSqrt()));
}

SpdMatrix spd_inv_sqrt(const SymMatrix& s) {
    const SymEig e = checked_eig(s);
    return SpdMatrix::trusted(from_eigen(e.vectors, e.values.cwiseSqrt().cwiseInverse()));
}

SpdRoots spd_roots(const SymMatrix& s) {
    const SymEig e = checked_eig(s);
    const Vector root = e.values.cwiseSqrt();
    return {SpdMatrix::trusted(from_eigen(e.vectors, root)),
            SpdMatrix::trusted(from_eigen(e.vectors, root.cwiseInverse()))};
}

Vector spd_solve(const SymMatrix& s, const Vector& b) {
    if (b.size() != s.dim()) throw Error(ErrorCode::InvalidInput, "spd_solve: shape mismatch");
    Eigen::LLT<Matrix> llt(s.matrix());
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
    return llt.solve(b);
}

double min_singular_value(const Matrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidInput, "min_singular_value: matrix not square");
    if (!m.allFinite()) throw Error(ErrorCode::InvalidMatrix, "non-finite entries");
    if (m.rows() == 1) return std::abs(m(0, 0));
    if (m.rows() == 2) {
        // s_max^2 + s_min^2 = ||M||_F^2 and s_max s_min = |det M|
        const double f2 = m.squaredNorm();
        const double det = std::abs(m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
        const double s_max = std::sqrt(0.5 * (f2 + std::sqrt(std::max(0.0, f2 * f2 - 4.0 * det * det))));
        return s_max > 0.0 ? det / s_max : 0.0;
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(m.rows() - 1);
}

} // namespace rebal
