#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rebal/matalg.hpp"

namespace rebal {

/// Haar-ish random orthogonal matrix from the QR factors of a Gaussian matrix.
Matrix random_orthogonal(int dim, std::mt19937_64& rng);

/// Q diag(lambda) Q^T with log-uniform eigenvalues in [lo, hi].
SymMatrix random_spd(int dim, double lo, double hi, std::mt19937_64& rng);

/// Q1 diag(s) Q2 with log-uniform singular values in [lo, hi].
Matrix random_regular(int dim, double lo, double hi, std::mt19937_64& rng);

struct PropertyReport {
    std::string suite;
    std::size_t cases = 0;
    std::size_t checks = 0;
    std::size_t failures = 0;
    /// Worst value of the suite's headline metric (see run_property_suite).
    double worst = 0.0;
    std::vector<std::string> messages; // first few failures
};

/**
 * Randomized property batteries.
 *
 *   riccati   : residual, positivity, scaling law, continuity, eigenbasis and
 *               monotonicity of the scalar function; worst = max relative residual
 *   moments   : both fourth-moment inequalities, minimizer optimality and
 *               sphere equality; worst = most negative scaled gap
 *   structure : J = U^T U, K^T J K = diag(S) Sigma diag(S) and the Riccati
 *               solve at random nodes; worst = max relative K^T J K error
 *
 * Throws Error(InvalidInput) for an unknown suite name.
 */
PropertyReport run_property_suite(const std::string& suite, std::uint64_t seed, std::size_t cases);

} // namespace rebal
