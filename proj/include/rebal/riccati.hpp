#pragma once

#include "rebal/matalg.hpp"

namespace rebal {

/// Solution L of 2 tr(LJ) L + 4 L J L = K^T J K together with its diagnostics.
struct RiccatiSolution {
    SpdMatrix L;
    double residual_norm = 0.0; // ||2 tr(LJ) L + 4 LJL - K^T J K||_F
    double trace_LJ = 0.0;
    double scalar_root = 0.0;   // t = tr(J^{1/2} L J^{1/2})
};

/**
 * Computes L = ell(J, K), the unique SPD solution of
 *
 *     2 tr(LJ) L + 4 L J L = K^T J K.
 *
 * With M = J^{1/2} L J^{1/2} the equation becomes 4 M^2 + 2 tr(M) M = C,
 * C = J^{1/2} K^T J K J^{1/2}. M shares the eigenbasis of C and its
 * eigenvalues are m_i(t) = (-t + sqrt(t^2 + 4 c_i)) / 4, where t = tr(M) is the
 * root of the strictly decreasing g(t) = sum_i m_i(t) - t on [0, sum_i sqrt(c_i)/2].
 *
 * Errors: NotPositiveDefinite (J), SingularK (sigma_min(K) < 1e-12 ||K||_F),
 * InvalidInput (shapes), NumericalFailure (bracket lost or residual above
 * 1e-10 ||K^T J K||_F).
 */
RiccatiSolution solve_ell(const SymMatrix& J, const Matrix& K);

/// Same solve when the right-hand side K^T J K is already assembled. L depends on K only through it.
RiccatiSolution solve_ell_rhs(const SymMatrix& J, const SymMatrix& rhs);

/// ||2 tr(LJ) L + 4 L J L - K^T J K||_F
double ell_residual(const SymMatrix& J, const Matrix& K, const SymMatrix& L);

/// g(t) = sum_i m_i(t) - t for the eigenvalues c_i of the reduced right-hand side.
double ell_scalar_g(const Vector& c, double t);

} // namespace rebal
