#pragma once

#include <Eigen/Dense>

#include "rebal/error.hpp"

namespace rebal {

/// Largest supported dimension. Matrices carry inline storage of this size
/// so per-node work on long paths never touches the heap.
inline constexpr int kMaxDim = 16;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/**
 * Dense symmetric matrix. Only the upper triangle of the source is read on
 * construction and mirrored, so symmetry holds exactly for every instance.
 */
class SymMatrix {
public:
    SymMatrix() = default;

    static SymMatrix zero(int dim);
    static SymMatrix identity(int dim);
    static SymMatrix diagonal(const Vector& diag);

    /// Copies the upper triangle of `m` (square, dim <= kMaxDim).
    template <class Derived>
    static SymMatrix from_upper(const Eigen::MatrixBase<Derived>& m) {
        check_shape(m.rows(), m.cols());
        SymMatrix s;
        s.m_.resize(m.rows(), m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i <= j; ++i) {
                s.m_(i, j) = m(i, j);
                s.m_(j, i) = m(i, j);
            }
        }
        return s;
    }

    /// (m + m^T) / 2.
    template <class Derived>
    static SymMatrix symmetrized(const Eigen::MatrixBase<Derived>& m) {
        check_shape(m.rows(), m.cols());
        SymMatrix s;
        s.m_.resize(m.rows(), m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i <= j; ++i) {
                const double v = 0.5 * (m(i, j) + m(j, i));
                s.m_(i, j) = v;
                s.m_(j, i) = v;
            }
        }
        return s;
    }

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    double operator()(int i, int j) const { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }
    double frobenius_norm() const { return m_.norm(); }
    double trace() const { return m_.trace(); }
    bool all_finite() const { return m_.allFinite(); }

private:
    static void check_shape(Eigen::Index rows, Eigen::Index cols);

    Matrix m_;
};

/// A SymMatrix whose smallest eigenvalue was verified to be >= eig_floor.
class SpdMatrix : public SymMatrix {
public:
    SpdMatrix() = default;

    /// Throws NotPositiveDefinite when the smallest eigenvalue is below the floor.
    static SpdMatrix checked(const SymMatrix& s);

    /// For producers that built `s` from eigenvalues already known to clear the floor.
    static SpdMatrix trusted(const SymMatrix& s) { return SpdMatrix(s); }

private:
    explicit SpdMatrix(const SymMatrix& s) : SymMatrix(s) {}
};

struct SymEig {
    Vector values;  // ascending
    Matrix vectors; // orthonormal columns, vectors.col(i) pairs with values(i)
};

/// Rejection threshold for positive definiteness: 1e-12 * max(1, ||S||_F).
double eig_floor(const SymMatrix& s);

SymEig sym_eig(const SymMatrix& s);

/// P diag(values) P^T, symmetrized.
SymMatrix from_eigen(const Matrix& vectors, const Vector& values);

SpdMatrix spd_sqrt(const SymMatrix& s);
SpdMatrix spd_inv_sqrt(const SymMatrix& s);

/// Both roots from one eigendecomposition.
struct SpdRoots {
    SpdMatrix sqrt;
    SpdMatrix inv_sqrt;
};
SpdRoots spd_roots(const SymMatrix& s);

/// Solves S x = b for SPD S via its Cholesky factor; NotPositiveDefinite on failure.
Vector spd_solve(const SymMatrix& s, const Vector& b);

/// Smallest singular value of a square matrix.
double min_singular_value(const Matrix& m);

} // namespace rebal
