#include "rebal/market.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "rebal/riccati.hpp"

namespace rebal {

void ModelSpec::validate() const {
    if (d < 1 || d > kMaxDim) throw Error(ErrorCode::InvalidInput, "model: d must be in [1, " + std::to_string(kMaxDim) + "]");
    if (m < d || m > kMaxDim) throw Error(ErrorCode::InvalidInput, "model: need d <= m <= " + std::to_string(kMaxDim));
    if (!mu || !r || !sigma || !pi || !c || !q_weight || !n_weight) {
        throw Error(ErrorCode::InvalidInput, "model: every coefficient function must be set");
    }
    if (!(v0 > 0.0)) throw Error(ErrorCode::InvalidInput, "model: v0 must be positive");
    if (!(s0_0 > 0.0)) throw Error(ErrorCode::InvalidInput, "model: s0_0 must be positive");
    if (s0.size() != d) throw Error(ErrorCode::InvalidInput, "model: s0 must have d entries");
    for (Eigen::Index i = 0; i < s0.size(); ++i) {
        if (!(s0(i) > 0.0)) throw Error(ErrorCode::InvalidInput, "model: initial prices must be positive");
    }
}

SymMatrix covariance(const Matrix& sigma) { return SymMatrix::symmetrized(sigma * sigma.transpose()); }

ModelSpec black_scholes_model(const Vector& mu, double r, const SymMatrix& Sigma, const Vector& pi, double c) {
    const int d = Sigma.dim();
    if (mu.size() != d || pi.size() != d) throw Error(ErrorCode::InvalidInput, "black_scholes_model: shape mismatch");
    Eigen::LLT<Matrix> llt(Sigma.matrix());
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "Sigma has no Cholesky factor");
    const Matrix sig = llt.matrixL();

    ModelSpec model;
    model.d = d;
    model.m = d;
    model.mu = [mu](double, PriceView) { return mu; };
    model.r = [r](double) { return r; };
    model.sigma = [sig](double, PriceView) { return sig; };
    model.pi = [pi](double) { return pi; };
    model.c = [c](double) { return c; };
    model.q_weight = [](double, PriceView, double) { return 1.0; };
    model.n_weight = [](double, PriceView, double) { return 1.0; };
    model.v0 = 1.0;
    model.s0 = Vector::Ones(d);
    model.s0_0 = 1.0;
    return model;
}

namespace {

/// Re-derives Sigma and its root only when sigma changes between nodes.
class CovarianceCache {
public:
    CovarianceCache(int d, int m, bool check_spd) : d_(d), m_(m), check_spd_(check_spd) {}

    void update(const Matrix& sigma) {
        if (sigma.rows() != d_ || sigma.cols() != m_) {
            throw Error(ErrorCode::InvalidInput, "sigma(t, S) must be " + std::to_string(d_) + "x" + std::to_string(m_));
        }
        if (valid_ && sigma == sigma_) return;
        if (!sigma.allFinite()) throw Error(ErrorCode::InvalidMatrix, "sigma(t, S) has non-finite entries");
        sigma_ = sigma;
        cov_ = covariance(sigma);
        have_root_ = false;
        if (check_spd_) SpdMatrix::checked(cov_);
        valid_ = true;
    }

    const Matrix& sigma() const { return sigma_; }
    const SymMatrix& cov() const { return cov_; }

    const SymMatrix& root() {
        if (!have_root_) {
            root_ = spd_sqrt(cov_);
            have_root_ = true;
        }
        return root_;
    }

private:
    int d_, m_;
    bool check_spd_;
    bool valid_ = false;
    bool have_root_ = false;
    Matrix sigma_;
    SymMatrix cov_;
    SymMatrix root_;
};

void check_grid(std::size_t G) {
    if (G < 2) throw Error(ErrorCode::InvalidInput, "grid size G must be at least 2");
}

} // namespace

MarketPath simulate_market(const ModelSpec& model, std::size_t G, PathSeed seed, SimulationOptions options) {
    model.validate();
    check_grid(G);
    const int d = model.d;
    const int m = model.m;
    const double dt = 1.0 / static_cast<double>(G);
    const double sqdt = std::sqrt(dt);

    MarketPath out;
    out.G = G;
    out.W = NodeArray(G + 1, static_cast<std::size_t>(m));
    out.S = NodeArray(G + 1, static_cast<std::size_t>(d));
    out.S0.assign(G + 1, 0.0);

    std::mt19937_64 rng = path_engine(seed);
    std::normal_distribution<double> normal;
    CovarianceCache cache(d, m, !options.allow_singular_sigma);

    Vector log_s = model.s0.array().log();
    for (int i = 0; i < d; ++i) out.S.row(0)[i] = model.s0(i);
    out.S0[0] = model.s0_0;
    double r_left = model.r(0.0);
    Vector dw(m);

    for (std::size_t k = 0; k < G; ++k) {
        const double t = static_cast<double>(k) * dt;
        const PriceView s_k = out.S.span(k);
        cache.update(model.sigma(t, s_k));
        const Vector mu = model.mu(t, s_k);
        if (mu.size() != d) throw Error(ErrorCode::InvalidInput, "mu(t, S) must have d entries");

        const double* w_k = out.W.row(k);
        double* w_next = out.W.row(k + 1);
        for (int j = 0; j < m; ++j) {
            dw(j) = sqdt * normal(rng);
            w_next[j] = w_k[j] + dw(j);
        }
        const Vector diffusion = cache.sigma() * dw;
        double* s_next = out.S.row(k + 1);
        for (int i = 0; i < d; ++i) {
            log_s(i) += (mu(i) - 0.5 * cache.cov()(i, i)) * dt + diffusion(i);
            s_next[i] = std::exp(log_s(i));
        }
        const double r_right = model.r(t + dt);
        out.S0[k + 1] = out.S0[k] * std::exp(0.5 * (r_left + r_right) * dt);
        r_left = r_right;
    }
    cache.update(model.sigma(1.0, out.S.span(G)));
    return out;
}

std::vector<double> wealth_path(const ModelSpec& model, std::size_t G, const NodeArray& S, std::span<const double> S0) {
    check_grid(G);
    const int d = model.d;
    if (S.nodes() != G + 1 || S.width != static_cast<std::size_t>(d) || S0.size() != G + 1) {
        throw Error(ErrorCode::InvalidInput, "wealth_path: price arrays do not match the grid");
    }
    const double dt = 1.0 / static_cast<double>(G);
    CovarianceCache cache(d, model.m, false);

    std::vector<double> V(G + 1);
    V[0] = model.v0;
    double log_v = std::log(model.v0);
    for (std::size_t k = 0; k < G; ++k) {
        const double t = static_cast<double>(k) * dt;
        const PriceView s_k = S.span(k);
        cache.update(model.sigma(t, s_k));
        const Vector pi = model.pi(t);
        if (pi.size() != d) throw Error(ErrorCode::InvalidInput, "pi(t) must have d entries");
        const SymMatrix& cov = cache.cov();

        const double* s_next = S.row(k + 1);
        double risky = 0.0;
        for (int i = 0; i < d; ++i) {
            const double ret = std::log(s_next[i] / s_k[i]) + 0.5 * cov(i, i) * dt;
            risky += pi(i) * ret;
        }
        const double pi0 = 1.0 - pi.sum();
        const double bond = pi0 * std::log(S0[k + 1] / S0[k]);
        const double quad = pi.dot(cov.matrix() * pi);
        log_v += risky + bond - (model.c(t) + 0.5 * quad) * dt;
        V[k + 1] = std::exp(log_v);
    }
    return V;
}

NodeStructure node_structure(const SymMatrix& Sigma, const SymMatrix& Sigma_sqrt, const Vector& pi,
                             std::span<const double> S, double V) {
    const int d = Sigma.dim();
    if (pi.size() != d || static_cast<int>(S.size()) != d || Sigma_sqrt.dim() != d) {
        throw Error(ErrorCode::InvalidInput, "node_structure: shape mismatch");
    }
    NodeStructure out;
    out.H.resize(d);
    for (int i = 0; i < d; ++i) out.H(i) = V * pi(i) / S[static_cast<std::size_t>(i)];

    // column i: H^i Sigma^{1/2} (pi - e_i)
    Matrix shift = pi * Vector::Ones(d).transpose();
    shift.diagonal().array() -= 1.0;
    out.U = Sigma_sqrt.matrix() * shift * out.H.asDiagonal();
    out.J = SymMatrix::symmetrized(out.U.transpose() * out.U);

    SpdMatrix j_inv_sqrt;
    try {
        j_inv_sqrt = spd_inv_sqrt(out.J);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotPositiveDefinite) throw;
        throw Error(ErrorCode::DegenerateStructure, std::string("J = U^T U is singular (pi^0 near 0?): ") + e.what());
    }
    Vector s(d);
    for (int i = 0; i < d; ++i) s(i) = S[static_cast<std::size_t>(i)];
    out.K = j_inv_sqrt.matrix() * Sigma_sqrt.matrix() * s.asDiagonal();
    out.price_cov = SymMatrix::symmetrized(s.asDiagonal() * Sigma.matrix() * s.asDiagonal());
    return out;
}

namespace {

void store(NodeArray& a, std::size_t k, const Matrix& m) {
    std::memcpy(a.row(k), m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

} // namespace

StructuralPaths structural_processes(const ModelSpec& model, std::size_t G, const NodeArray& S,
                                     std::span<const double> V) {
    check_grid(G);
    const int d = model.d;
    if (S.nodes() != G + 1 || V.size() != G + 1) throw Error(ErrorCode::InvalidInput, "structural_processes: arrays do not match the grid");
    const auto dd = static_cast<std::size_t>(d * d);
    StructuralPaths out{NodeArray(G + 1, static_cast<std::size_t>(d)), NodeArray(G + 1, dd), NodeArray(G + 1, dd),
                        NodeArray(G + 1, dd), NodeArray(G + 1, dd)};
    CovarianceCache cache(d, model.m, true);
    const double dt = 1.0 / static_cast<double>(G);

    for (std::size_t k = 0; k <= G; ++k) {
        const double t = static_cast<double>(k) * dt;
        const PriceView s_k = S.span(k);
        cache.update(model.sigma(t, s_k));
        const Vector pi = model.pi(t);
        for (int i = 0; i < d; ++i) {
            if (!(pi(i) > 0.0)) throw Error(ErrorCode::InvalidInput, "target weights must be positive");
        }
        const NodeStructure ns = node_structure(cache.cov(), cache.root(), pi, s_k, V[k]);
        std::memcpy(out.H.row(k), ns.H.data(), sizeof(double) * static_cast<std::size_t>(d));
        store(out.U, k, ns.U);
        store(out.J, k, ns.J.matrix());
        store(out.K, k, ns.K);
        store(out.price_cov, k, ns.price_cov.matrix());
    }
    return out;
}

RiccatiPath riccati_along_path(int d, const NodeArray& J, const NodeArray& K) {
    const auto dd = static_cast<std::size_t>(d * d);
    if (J.width != dd || K.width != dd || J.nodes() != K.nodes()) {
        throw Error(ErrorCode::InvalidInput, "riccati_along_path: arrays do not match");
    }
    const std::size_t nodes = J.nodes();
    RiccatiPath out{NodeArray(nodes, dd), std::vector<double>(nodes), 0.0};
    for (std::size_t k = 0; k < nodes; ++k) {
        const bool repeat = k > 0 && std::memcmp(J.row(k), J.row(k - 1), dd * sizeof(double)) == 0 &&
                            std::memcmp(K.row(k), K.row(k - 1), dd * sizeof(double)) == 0;
        if (repeat) {
            std::memcpy(out.L.row(k), out.L.row(k - 1), dd * sizeof(double));
            out.trace_lj[k] = out.trace_lj[k - 1];
            continue;
        }
        const SymMatrix j = SymMatrix::from_upper(J.mat(k, d));
        const Matrix kk = K.mat(k, d);
        const RiccatiSolution sol = solve_ell(j, kk);
        store(out.L, k, sol.L.matrix());
        out.trace_lj[k] = sol.trace_LJ;
        const Matrix rhs = kk.transpose() * j.matrix() * kk;
        out.max_relative_residual = std::max(out.max_relative_residual, sol.residual_norm / rhs.norm());
    }
    return out;
}

Vector growth_optimal_weights(const Vector& mu, double r, const SymMatrix& Sigma) {
    if (mu.size() != Sigma.dim()) throw Error(ErrorCode::InvalidInput, "growth_optimal_weights: shape mismatch");
    const SpdMatrix spd = SpdMatrix::checked(Sigma);
    const Vector excess = mu.array() - r;
    return spd_solve(spd, excess);
}

SamplePath build_sample_path(const ModelSpec& model, std::size_t G, PathSeed seed) {
    return build_sample_path(model, simulate_market(model, G, seed), seed);
}

SamplePath build_sample_path(const ModelSpec& model, MarketPath market, PathSeed seed) {
    model.validate();
    const std::size_t G = market.G;
    SamplePath p;
    p.d = model.d;
    p.m = model.m;
    p.G = G;
    p.seed = seed;
    p.V = wealth_path(model, G, market.S, market.S0);
    StructuralPaths sp = structural_processes(model, G, market.S, p.V);
    RiccatiPath rp = riccati_along_path(model.d, sp.J, sp.K);

    p.Q.resize(G + 1);
    p.N.resize(G + 1);
    for (std::size_t k = 0; k <= G; ++k) {
        const double t = p.time(k);
        p.Q[k] = model.q_weight(t, market.S.span(k), p.V[k]);
        p.N[k] = model.n_weight(t, market.S.span(k), p.V[k]);
        if (!(p.Q[k] > 0.0) || !(p.N[k] > 0.0) || !std::isfinite(p.Q[k]) || !std::isfinite(p.N[k])) {
            throw Error(ErrorCode::InvalidInput, "weights Q and N must be positive and finite");
        }
    }
    p.W = std::move(market.W);
    p.S = std::move(market.S);
    p.S0 = std::move(market.S0);
    p.H = std::move(sp.H);
    p.U = std::move(sp.U);
    p.J = std::move(sp.J);
    p.K = std::move(sp.K);
    p.price_cov = std::move(sp.price_cov);
    p.L = std::move(rp.L);
    p.trace_lj = std::move(rp.trace_lj);
    p.max_riccati_residual = rp.max_relative_residual;
    return p;
}

MarketPath coarsen(const MarketPath& fine, std::size_t factor) {
    if (factor == 0 || fine.G % factor != 0 || fine.G / factor < 2) {
        throw Error(ErrorCode::InvalidInput, "coarsen: factor must divide G and leave at least 2 steps");
    }
    MarketPath out;
    out.G = fine.G / factor;
    out.W = NodeArray(out.G + 1, fine.W.width);
    out.S = NodeArray(out.G + 1, fine.S.width);
    out.S0.resize(out.G + 1);
    for (std::size_t k = 0; k <= out.G; ++k) {
        std::memcpy(out.W.row(k), fine.W.row(k * factor), fine.W.width * sizeof(double));
        std::memcpy(out.S.row(k), fine.S.row(k * factor), fine.S.width * sizeof(double));
        out.S0[k] = fine.S0[k * factor];
    }
    return out;
}

} // namespace rebal
