#include "rebal/moments.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "rebal/proptest.hpp"

namespace rebal {

DiscreteDistribution::DiscreteDistribution(std::vector<Vector> points, std::vector<double> probs)
    : points_(std::move(points)), probs_(std::move(probs)) {
    if (points_.empty() || points_.size() != probs_.size()) {
        throw Error(ErrorCode::InvalidInput, "distribution needs matching, nonempty atoms and probabilities");
    }
    dim_ = static_cast<int>(points_.front().size());
    if (dim_ < 1 || dim_ > kMaxDim) throw Error(ErrorCode::InvalidInput, "distribution dimension out of range");
    double total = 0.0;
    for (std::size_t k = 0; k < points_.size(); ++k) {
        if (points_[k].size() != dim_) throw Error(ErrorCode::InvalidInput, "atoms of mixed dimension");
        if (!points_[k].allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite atom");
        if (!(probs_[k] > 0.0)) throw Error(ErrorCode::InvalidInput, "atom probabilities must be positive");
        total += probs_[k];
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidInput, "probabilities sum to " + std::to_string(total));
    }
    Vector mean = Vector::Zero(dim_);
    for (std::size_t k = 0; k < points_.size(); ++k) mean += probs_[k] * points_[k];
    for (auto& p : points_) p -= mean;
}

MomentTensors moment_tensors(const DiscreteDistribution& dist) {
    const int d = dist.dim();
    MomentTensors m{Matrix::Zero(d, d), Vector::Zero(d), 0.0, 0.0};
    for (std::size_t k = 0; k < dist.size(); ++k) {
        const Vector& x = dist.points()[k];
        const double p = dist.probs()[k];
        const double sq = x.squaredNorm();
        m.cov.noalias() += p * x * x.transpose();
        m.third += (p * sq) * x;
        m.fourth += p * sq * sq;
        m.second += p * sq;
    }
    m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
    return m;
}

double pearson_gap(const MomentTensors& m, const Vector& delta) {
    if (delta.size() != m.third.size()) throw Error(ErrorCode::InvalidInput, "pearson_gap: shape mismatch");
    const double dd = delta.squaredNorm();
    return m.fourth + 4.0 * delta.dot(m.cov * delta) + 4.0 * delta.dot(m.third) + 2.0 * dd * m.second -
           m.second * m.second;
}

double pearson_gap(const DiscreteDistribution& dist, const Vector& delta) {
    return pearson_gap(moment_tensors(dist), delta);
}

Vector pearson_minimizer(const MomentTensors& m) {
    const auto d = m.third.size();
    const Matrix a = 2.0 * m.cov + m.second * Matrix::Identity(d, d);
    return -spd_solve(SymMatrix::from_upper(a), m.third);
}

double mks_gap(const MomentTensors& m, const SymMatrix& D) {
    if (D.dim() != m.third.size()) throw Error(ErrorCode::InvalidInput, "mks_gap: shape mismatch");
    const SymMatrix a = SymMatrix::from_upper(m.cov + D.matrix());
    const Vector x = spd_solve(a, m.third);
    return m.fourth - m.third.dot(x) - m.second * m.second;
}

double mks_gap(const DiscreteDistribution& dist, const SymMatrix& D) { return mks_gap(moment_tensors(dist), D); }

double isserlis_quartic(const SymMatrix& L, const SymMatrix& J) {
    if (L.dim() != J.dim()) throw Error(ErrorCode::InvalidInput, "isserlis_quartic: shape mismatch");
    const Matrix lj = L.matrix() * J.matrix();
    const double tr = lj.trace();
    return tr * tr + 2.0 * (lj * lj).trace();
}

DiscreteDistribution random_distribution(int dim, int atoms, std::mt19937_64& rng) {
    if (atoms < 1) throw Error(ErrorCode::InvalidInput, "random_distribution: need at least one atom");
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo(1.0);
    std::vector<Vector> pts(atoms, Vector(dim));
    std::vector<double> w(atoms);
    for (int k = 0; k < atoms; ++k) {
        for (int i = 0; i < dim; ++i) pts[k](i) = normal(rng);
        w[k] = expo(rng);
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    return DiscreteDistribution(std::move(pts), std::move(w));
}

DiscreteDistribution random_sphere_distribution(int dim, double radius, bool symmetric, std::mt19937_64& rng) {
    std::vector<Vector> pts;
    std::vector<double> w;
    if (symmetric) {
        std::normal_distribution<double> normal;
        std::exponential_distribution<double> expo(1.0);
        const int pairs = dim + 1;
        double total = 0.0;
        for (int k = 0; k < pairs; ++k) {
            Vector x(dim);
            for (int i = 0; i < dim; ++i) x(i) = normal(rng);
            x *= radius / x.norm();
            const double p = expo(rng);
            pts.push_back(x);
            pts.push_back(-x);
            w.push_back(p);
            w.push_back(p);
            total += 2.0 * p;
        }
        for (auto& x : w) x /= total;
    } else {
        // Vertices of the regular simplex: project e_k onto the complement of (1,...,1).
        Eigen::MatrixXd basis = Eigen::MatrixXd::Ones(dim + 1, dim + 1);
        basis.rightCols(dim) = Eigen::MatrixXd::Identity(dim + 1, dim);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim + 1, dim + 1);
        const Matrix rot = random_orthogonal(dim, rng);
        const double scale = radius / std::sqrt(1.0 - 1.0 / (dim + 1));
        for (int k = 0; k <= dim; ++k) {
            const Eigen::VectorXd v = rot * q.row(k).tail(dim).transpose() * scale;
            pts.emplace_back(v);
            w.push_back(1.0 / (dim + 1));
        }
    }
    return DiscreteDistribution(std::move(pts), std::move(w));
}

} // namespace rebal
