#pragma once

#include <random>
#include <vector>

#include "rebal/matalg.hpp"

namespace rebal {

/// Finite-support law in R^d. Construction normalizes nothing but recenters the atoms to mean zero.
class DiscreteDistribution {
public:
    /// Throws InvalidInput unless every probability is > 0 and they sum to 1 within 1e-12.
    DiscreteDistribution(std::vector<Vector> points, std::vector<double> probs);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<Vector>& points() const noexcept { return points_; }
    const std::vector<double>& probs() const noexcept { return probs_; }

private:
    int dim_ = 0;
    std::vector<Vector> points_;
    std::vector<double> probs_;
};

struct MomentTensors {
    Matrix cov;    // E[D D^T]
    Vector third;  // E[D (D^T D)]
    double fourth; // E[(D^T D)^2]
    double second; // E[D^T D]
};

MomentTensors moment_tensors(const DiscreteDistribution& dist);

/**
 * E[((D + delta)^T (D + delta))^2] - (delta^T delta)^2 - E[D^T D]^2, evaluated
 * from the moment tensors through the expansion
 *   E[(D^T D)^2] + 4 delta^T E[D D^T] delta + 4 delta^T E[D (D^T D)]
 *   + 2 delta^T delta E[D^T D] - E[D^T D]^2.
 * Nonnegative for every centered law and every delta.
 */
double pearson_gap(const MomentTensors& m, const Vector& delta);
double pearson_gap(const DiscreteDistribution& dist, const Vector& delta);

/// The delta minimizing pearson_gap: -(2 E[D D^T] + E[D^T D] I)^{-1} E[D (D^T D)].
Vector pearson_minimizer(const MomentTensors& m);

/// E[(D^T D)^2] - third^T (cov + D)^{-1} third - second^2. Nonnegative for SPD D.
double mks_gap(const MomentTensors& m, const SymMatrix& D);
double mks_gap(const DiscreteDistribution& dist, const SymMatrix& D);

/// tr(LJ)^2 + 2 tr(LJLJ) = E[(X^T L X)^2] for X ~ N(0, J).
double isserlis_quartic(const SymMatrix& L, const SymMatrix& J);

/// Atoms from a standard Gaussian cloud, weights from a uniform simplex draw, then recentered.
DiscreteDistribution random_distribution(int dim, int atoms, std::mt19937_64& rng);

/// Centered law supported on the sphere of the given radius: random antipodal
/// pairs with unequal pair weights, or a rotated regular simplex when `symmetric` is false.
DiscreteDistribution random_sphere_distribution(int dim, double radius, bool symmetric, std::mt19937_64& rng);

} // namespace rebal
