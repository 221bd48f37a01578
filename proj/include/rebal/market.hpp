#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rebal/matalg.hpp"
#include "rebal/rng.hpp"

namespace rebal {

using PriceView = std::span<const double>;

/**
 * Market and strategy inputs on [0, 1].
 *
 * Drift and volatility may depend on (t, S); the rate, target weights and
 * consumption are deterministic in t; the cost weights Q and N may depend on
 * (t, S, V). sigma(t, S) is d x m with m >= d.
 */
struct ModelSpec {
    int d = 1;
    int m = 1;
    std::function<Vector(double, PriceView)> mu;
    std::function<double(double)> r;
    std::function<Matrix(double, PriceView)> sigma;
    std::function<Vector(double)> pi;
    std::function<double(double)> c;
    std::function<double(double, PriceView, double)> q_weight;
    std::function<double(double, PriceView, double)> n_weight;
    double v0 = 1.0;
    Vector s0;
    double s0_0 = 1.0;

    /// Shapes, missing functions, positivity of v0, s0 and s0_0. Throws InvalidInput.
    void validate() const;
};

/// Constant-coefficient model with sigma = lower Cholesky factor of Sigma (m = d) and Q = N = 1.
ModelSpec black_scholes_model(const Vector& mu, double r, const SymMatrix& Sigma, const Vector& pi, double c = 0.0);

/// Sigma(t) = sigma sigma^T.
SymMatrix covariance(const Matrix& sigma);

/// Row-major (G+1) x width array of per-node values.
struct NodeArray {
    std::size_t width = 0;
    std::vector<double> data;

    NodeArray() = default;
    NodeArray(std::size_t nodes, std::size_t w) : width(w), data(nodes * w, 0.0) {}

    std::size_t nodes() const noexcept { return width == 0 ? 0 : data.size() / width; }
    double* row(std::size_t k) noexcept { return data.data() + k * width; }
    const double* row(std::size_t k) const noexcept { return data.data() + k * width; }
    std::span<const double> span(std::size_t k) const noexcept { return {row(k), width}; }
    Eigen::Map<const Eigen::VectorXd> vec(std::size_t k) const {
        return {row(k), static_cast<Eigen::Index>(width)};
    }
    /// d x d matrix stored column-major in a row of width d*d.
    Eigen::Map<const Eigen::MatrixXd> mat(std::size_t k, int d) const { return {row(k), d, d}; }
};

struct MarketPath {
    std::size_t G = 0;
    NodeArray W;  // m
    NodeArray S;  // d
    std::vector<double> S0;
};

struct SimulationOptions {
    /// Accept a singular (e.g. zero) volatility; only for deterministic test markets.
    bool allow_singular_sigma = false;
};

/**
 * Exact log-Euler stepping of the prices on the uniform grid t_k = k/G:
 * log S^i += (mu^i - Sigma^ii / 2) dt + (sigma dW)^i with left-point
 * coefficients; S0 = s0_0 exp(int r dt) with the trapezoidal rule.
 * Throws NotPositiveDefinite when Sigma(t_k) is not SPD.
 */
MarketPath simulate_market(const ModelSpec& model, std::size_t G, PathSeed seed, SimulationOptions options = {});

/// Continuous-strategy wealth from the exponential formula, accumulated in log space.
std::vector<double> wealth_path(const ModelSpec& model, std::size_t G, const NodeArray& S, std::span<const double> S0);

/// Share vector H, loading matrix U, J = U^T U and K at one node.
struct NodeStructure {
    Vector H;
    Matrix U;
    SymMatrix J;
    Matrix K;
    SymMatrix price_cov; // diag(S) Sigma diag(S) = K^T J K
};

/**
 * H^i = V pi^i / S^i, U^i = H^i Sigma^{1/2} (pi - e_i), J = U^T U and
 * K = J^{-1/2} Sigma^{1/2} diag(S), so that K^T J K is the price-level
 * covariance rate diag(S) Sigma diag(S).
 * Throws DegenerateStructure when J falls below the eigenvalue floor.
 */
NodeStructure node_structure(const SymMatrix& Sigma, const SymMatrix& Sigma_sqrt, const Vector& pi,
                             std::span<const double> S, double V);

struct StructuralPaths {
    NodeArray H; // d
    NodeArray U; // d*d
    NodeArray J; // d*d
    NodeArray K; // d*d
    NodeArray price_cov; // d*d
};

StructuralPaths structural_processes(const ModelSpec& model, std::size_t G, const NodeArray& S,
                                     std::span<const double> V);

struct RiccatiPath {
    NodeArray L;                       // d*d
    std::vector<double> trace_lj;      // tr(L_t J_t)
    double max_relative_residual = 0; // max_t residual / ||K^T J K||_F
};

/// L_t = ell(J_t, K_t) at every node.
RiccatiPath riccati_along_path(int d, const NodeArray& J, const NodeArray& K);

/// Sigma^{-1} (mu - r 1).
Vector growth_optimal_weights(const Vector& mu, double r, const SymMatrix& Sigma);

/// All per-node processes of one simulated trajectory on t_k = k/G.
struct SamplePath {
    int d = 0;
    int m = 0;
    std::size_t G = 0;
    PathSeed seed;
    NodeArray W, S;
    std::vector<double> S0, V;
    NodeArray H, U, J, K, L, price_cov;
    std::vector<double> trace_lj;
    std::vector<double> Q, N;
    double max_riccati_residual = 0.0;

    double dt() const noexcept { return 1.0 / static_cast<double>(G); }
    double time(std::size_t k) const noexcept { return static_cast<double>(k) / static_cast<double>(G); }
};

/// simulate_market, wealth_path, structural_processes, riccati_along_path and the weights Q, N.
SamplePath build_sample_path(const ModelSpec& model, std::size_t G, PathSeed seed);

/// Same pipeline on given prices (e.g. a subsampled fine path).
SamplePath build_sample_path(const ModelSpec& model, MarketPath market, PathSeed seed = {});

/// Every `factor`-th node of a market path.
MarketPath coarsen(const MarketPath& fine, std::size_t factor);

} // namespace rebal
