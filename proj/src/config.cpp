#include "rebal/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rebal/expr.hpp"

namespace rebal {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string_view to_string(StrategyKind kind) noexcept {
    switch (kind) {
    case StrategyKind::Hitting: return "hitting";
    case StrategyKind::Equidistant: return "equidistant";
    case StrategyKind::Both: return "both";
    }
    return "unknown";
}

std::string_view to_string(SharesMode mode) noexcept {
    return mode == SharesMode::Oracle ? "oracle" : "implementable";
}

std::string ExperimentConfig::canonical_text() const {
    std::string out;
    for (const auto& [key, value] : entries) {
        if (key == "output.path") continue;
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_text()); }

std::string ExperimentConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

void ExperimentConfig::set_master_seed(std::uint64_t seed) {
    master_seed = seed;
    entries["run.master_seed"] = std::to_string(seed);
}

namespace {

const std::vector<std::string_view> kKeys = {
    "model.d", "model.m", "model.mu", "model.r", "model.Sigma", "model.sigma", "model.pi", "model.c",
    "model.q_weight", "model.n_weight", "model.v0", "model.s0", "model.s0_0",
    "grid.G",
    "run.paths", "run.master_seed",
    "strategy.kind", "strategy.epsilon_schedule", "strategy.target_rebalances", "strategy.pilot_paths",
    "strategy.pilot_G", "strategy.n_schedule", "strategy.shares_mode", "strategy.min_steps",
    "frontier.match_effort",
    "output.path",
};

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_spaces(std::string_view s) {
    std::string out;
    for (const char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

struct Raw {
    std::string value;
    int line = 0; // 0 for defaults
};

class Builder {
public:
    Builder(std::string_view text, std::string_view source) : source_(source) { read(text); }

    ExperimentConfig build();

private:
    [[noreturn]] void fail(int line, const std::string& msg) const {
        std::string where(source_);
        if (line > 0) where += ":" + std::to_string(line);
        throw Error(ErrorCode::ConfigError, where + ": " + msg);
    }
    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
        const auto it = raw_.find(key);
        fail(it == raw_.end() ? 0 : it->second.line, key + ": " + msg);
    }

    void read(std::string_view text);
    bool has(const std::string& key) const { return raw_.count(key) != 0; }
    const std::string& value(const std::string& key) const {
        const auto it = raw_.find(key);
        if (it == raw_.end()) fail(0, "missing required key " + key);
        return it->second.value;
    }
    void set_default(const std::string& key, std::string v) {
        if (!has(key)) raw_[key] = Raw{std::move(v), 0};
    }

    std::uint64_t get_u64(const std::string& key) const;
    double get_number(const std::string& key) const;
    std::vector<double> get_number_list(const std::string& key) const;
    Expr get_expr(const std::string& key, std::string_view text, unsigned vars) const;
    std::vector<Expr> get_expr_list(const std::string& key, std::size_t count, unsigned vars) const;

    void build_model(ExperimentConfig& cfg);
    void validate_model_on_grid(const ExperimentConfig& cfg) const;

    std::string source_;
    std::map<std::string, Raw> raw_;
    int d_ = 0;
    bool time_invariant_ = true;
};

void Builder::read(std::string_view text) {
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string content = trim(line);
        if (content.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
        const std::string key = trim(std::string_view(content).substr(0, eq));
        const std::string val = trim(std::string_view(content).substr(eq + 1));
        if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) fail(line_no, "unknown key '" + key + "'");
        if (val.empty()) fail(line_no, key + ": empty value");
        if (const auto it = raw_.find(key); it != raw_.end()) {
            fail(line_no, "duplicate key " + key + " (first set on line " + std::to_string(it->second.line) + ")");
        }
        raw_[key] = Raw{val, line_no};
        if (end == text.size()) break;
    }
}

std::uint64_t Builder::get_u64(const std::string& key) const {
    const std::string& v = value(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail_key(key, "expected a nonnegative integer, got '" + v + "'");
    return out;
}

double Builder::get_number(const std::string& key) const {
    const Expr e = get_expr(key, value(key), 0);
    return e.constant_value();
}

std::vector<double> Builder::get_number_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(value(key), ',')) out.push_back(get_expr(key, item, 0).constant_value());
    return out;
}

Expr Builder::get_expr(const std::string& key, std::string_view text, unsigned vars) const {
    Expr e;
    try {
        e = Expr::parse(text, d_, vars);
    } catch (const Error& err) {
        if (err.code() != ErrorCode::ConfigError) throw;
        std::string msg = err.what();
        const std::string prefix = std::string(to_string(ErrorCode::ConfigError)) + ": ";
        if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
        fail_key(key, msg);
    }
    if (e.is_constant() && !std::isfinite(e.constant_value())) fail_key(key, "value is not finite");
    return e;
}

std::vector<Expr> Builder::get_expr_list(const std::string& key, std::size_t count, unsigned vars) const {
    const auto items = split(value(key), ',');
    if (items.size() != count) {
        fail_key(key, "expected " + std::to_string(count) + " comma-separated entries, got " + std::to_string(items.size()));
    }
    std::vector<Expr> out;
    for (const auto& item : items) out.push_back(get_expr(key, item, vars));
    return out;
}

bool is_power_of_two(std::uint64_t x) { return x >= 2 && (x & (x - 1)) == 0; }

Vector eval_list(const std::vector<Expr>& exprs, double t, PriceView s, double v = 0.0) {
    Vector out(static_cast<int>(exprs.size()));
    for (std::size_t i = 0; i < exprs.size(); ++i) out(static_cast<int>(i)) = exprs[i].eval(t, s, v);
    return out;
}

bool all_constant(const std::vector<Expr>& exprs) {
    return std::all_of(exprs.begin(), exprs.end(), [](const Expr& e) { return e.is_constant(); });
}

void Builder::build_model(ExperimentConfig& cfg) {
    const std::uint64_t d = get_u64("model.d");
    if (d < 1 || d > static_cast<std::uint64_t>(kMaxDim)) fail_key("model.d", "must be in [1, " + std::to_string(kMaxDim) + "]");
    d_ = static_cast<int>(d);
    set_default("model.m", std::to_string(d));
    std::string ones = "1";
    for (std::uint64_t i = 1; i < d; ++i) ones += ",1";
    set_default("model.s0", ones);

    const std::uint64_t m = get_u64("model.m");
    if (m < d || m > static_cast<std::uint64_t>(kMaxDim)) fail_key("model.m", "need d <= m <= " + std::to_string(kMaxDim));

    ModelSpec& model = cfg.model;
    model.d = d_;
    model.m = static_cast<int>(m);

    const auto mu = get_expr_list("model.mu", d, kVarT | kVarS);
    model.mu = [mu](double t, PriceView s) { return eval_list(mu, t, s); };

    const Expr r = get_expr("model.r", value("model.r"), kVarT);
    model.r = [r](double t) { return r.eval(t); };

    const auto pi = get_expr_list("model.pi", d, kVarT);
    model.pi = [pi](double t) { return eval_list(pi, t, {}); };

    const Expr c = get_expr("model.c", value("model.c"), kVarT);
    model.c = [c](double t) { return c.eval(t); };

    const Expr q = get_expr("model.q_weight", value("model.q_weight"), kVarT | kVarS | kVarV);
    model.q_weight = [q](double t, PriceView s, double v) { return q.eval(t, s, v); };
    const Expr n = get_expr("model.n_weight", value("model.n_weight"), kVarT | kVarS | kVarV);
    model.n_weight = [n](double t, PriceView s, double v) { return n.eval(t, s, v); };

    const bool has_cov = has("model.Sigma");
    if (has_cov == has("model.sigma")) fail(0, "set exactly one of model.Sigma and model.sigma");
    if (has_cov) {
        if (m != d) fail_key("model.Sigma", "model.Sigma implies m = d; use model.sigma for m > d");
        const auto rows = split(value("model.Sigma"), ';');
        if (rows.size() != d) fail_key("model.Sigma", "expected " + std::to_string(d) + " rows separated by ';'");
        std::vector<Expr> cells;
        for (const auto& row : rows) {
            const auto items = split(row, ',');
            if (items.size() != d) fail_key("model.Sigma", "every row needs " + std::to_string(d) + " entries");
            for (const auto& item : items) cells.push_back(get_expr("model.Sigma", item, kVarT));
        }
        const int dd = d_;
        auto factor = [cells, dd](double t) {
            Matrix cov(dd, dd);
            for (int i = 0; i < dd; ++i) {
                for (int j = 0; j < dd; ++j) cov(i, j) = cells[static_cast<std::size_t>(i * dd + j)].eval(t);
            }
            if ((cov - cov.transpose()).norm() > 1e-12 * std::max(1.0, cov.norm())) {
                throw Error(ErrorCode::InvalidMatrix, "Sigma is not symmetric at t = " + std::to_string(t));
            }
            Eigen::LLT<Matrix> llt(cov);
            if (llt.info() != Eigen::Success) {
                throw Error(ErrorCode::NotPositiveDefinite, "Sigma is not positive definite at t = " + std::to_string(t));
            }
            return Matrix(llt.matrixL());
        };
        if (all_constant(cells)) {
            Matrix fixed;
            try {
                fixed = factor(0.0);
            } catch (const Error& e) {
                fail_key("model.Sigma", std::string("covariance rejected: ") + e.what());
            }
            model.sigma = [fixed](double, PriceView) { return fixed; };
        } else {
            model.sigma = [factor](double t, PriceView) { return factor(t); };
        }
    } else {
        const auto rows = split(value("model.sigma"), ';');
        if (rows.size() != d) fail_key("model.sigma", "expected " + std::to_string(d) + " rows separated by ';'");
        std::vector<Expr> cells;
        for (const auto& row : rows) {
            const auto items = split(row, ',');
            if (items.size() != m) fail_key("model.sigma", "every row needs m = " + std::to_string(m) + " entries");
            for (const auto& item : items) cells.push_back(get_expr("model.sigma", item, kVarT | kVarS));
        }
        const int rd = d_, cm = static_cast<int>(m);
        model.sigma = [cells, rd, cm](double t, PriceView s) {
            Matrix out(rd, cm);
            for (int i = 0; i < rd; ++i) {
                for (int j = 0; j < cm; ++j) out(i, j) = cells[static_cast<std::size_t>(i * cm + j)].eval(t, s);
            }
            return out;
        };
    }

    model.v0 = get_number("model.v0");
    model.s0_0 = get_number("model.s0_0");
    const auto s0 = get_number_list("model.s0");
    if (s0.size() != d) fail_key("model.s0", "expected " + std::to_string(d) + " entries");
    model.s0 = Vector(d_);
    for (int i = 0; i < d_; ++i) model.s0(i) = s0[static_cast<std::size_t>(i)];
    if (!(model.v0 > 0.0)) fail_key("model.v0", "must be positive");
    if (!(model.s0_0 > 0.0)) fail_key("model.s0_0", "must be positive");
    if (!(model.s0.array() > 0.0).all()) fail_key("model.s0", "prices must be positive");
}

// Deterministic coefficients are checked on every grid node; state-dependent
// ones at the initial state only (the simulation re-checks them per path).
void Builder::validate_model_on_grid(const ExperimentConfig& cfg) const {
    const ModelSpec& model = cfg.model;
    const std::size_t G = cfg.grid_G;
    const PriceView s0(model.s0.data(), static_cast<std::size_t>(model.d));
    for (std::size_t k = 0; k <= G; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(G);
        const Vector pi = model.pi(t);
        if (!pi.allFinite() || !(pi.array() > 0.0).all()) {
            fail_key("model.pi", "weights must be positive at t = " + std::to_string(t));
        }
        if (std::abs(1.0 - pi.sum()) <= 1e-12) fail_key("model.pi", "bond weight 1 - sum(pi) vanishes at t = " + std::to_string(t));
        const double c = model.c(t);
        if (!(c >= 0.0) || !std::isfinite(c)) fail_key("model.c", "must be nonnegative at t = " + std::to_string(t));
        if (!std::isfinite(model.r(t))) fail_key("model.r", "not finite at t = " + std::to_string(t));
        if (!model.mu(t, s0).allFinite()) fail_key("model.mu", "not finite at t = " + std::to_string(t));
        const std::string sigma_key = has("model.Sigma") ? "model.Sigma" : "model.sigma";
        try {
            SpdMatrix::checked(covariance(model.sigma(t, s0)));
        } catch (const Error& e) {
            fail_key(sigma_key, "covariance is not positive definite at t = " + std::to_string(t) + " (" + e.what() + ")");
        }
        const double q = model.q_weight(t, s0, model.v0);
        const double n = model.n_weight(t, s0, model.v0);
        if (!(q > 0.0) || !std::isfinite(q)) fail_key("model.q_weight", "must be positive at t = " + std::to_string(t));
        if (!(n > 0.0) || !std::isfinite(n)) fail_key("model.n_weight", "must be positive at t = " + std::to_string(t));
        // a coefficient set that does not depend on t needs one check only
        if (k == 0 && time_invariant_) break;
    }
}

ExperimentConfig Builder::build() {
    for (const auto& [key, v] : std::map<std::string, std::string>{
             {"model.r", "0"}, {"model.c", "0"}, {"model.q_weight", "1"}, {"model.n_weight", "1"},
             {"model.v0", "1"}, {"model.s0_0", "1"}, {"run.paths", "1"}, {"run.master_seed", "0"},
             {"strategy.kind", "both"}, {"strategy.pilot_paths", "32"}, {"strategy.pilot_G", "16384"},
             {"strategy.shares_mode", "oracle"}, {"strategy.min_steps", "64"}, {"frontier.match_effort", "true"}}) {
        set_default(key, v);
    }

    ExperimentConfig cfg;
    build_model(cfg);

    const std::uint64_t G = get_u64("grid.G");
    if (!is_power_of_two(G) || G > (1ULL << 28)) fail_key("grid.G", "must be a power of two in [2, 2^28]");
    cfg.grid_G = static_cast<std::size_t>(G);

    cfg.paths = static_cast<std::size_t>(get_u64("run.paths"));
    if (cfg.paths == 0) fail_key("run.paths", "must be positive");
    cfg.master_seed = get_u64("run.master_seed");

    const std::string& kind = value("strategy.kind");
    if (kind == "hitting") {
        cfg.strategy = StrategyKind::Hitting;
    } else if (kind == "equidistant") {
        cfg.strategy = StrategyKind::Equidistant;
    } else if (kind == "both") {
        cfg.strategy = StrategyKind::Both;
    } else {
        fail_key("strategy.kind", "expected hitting, equidistant or both");
    }

    if (cfg.runs_hitting()) {
        const bool eps = has("strategy.epsilon_schedule");
        const bool targets = has("strategy.target_rebalances");
        if (eps == targets) fail(0, "hitting runs need exactly one of strategy.epsilon_schedule and strategy.target_rebalances");
        if (eps) {
            cfg.epsilon_schedule = get_number_list("strategy.epsilon_schedule");
            for (std::size_t i = 0; i < cfg.epsilon_schedule.size(); ++i) {
                if (!(cfg.epsilon_schedule[i] > 0.0)) fail_key("strategy.epsilon_schedule", "entries must be positive");
                if (i > 0 && !(cfg.epsilon_schedule[i] < cfg.epsilon_schedule[i - 1])) {
                    fail_key("strategy.epsilon_schedule", "must be strictly decreasing");
                }
            }
        } else {
            cfg.target_rebalances = get_number_list("strategy.target_rebalances");
            for (std::size_t i = 0; i < cfg.target_rebalances.size(); ++i) {
                if (!(cfg.target_rebalances[i] > 0.0)) fail_key("strategy.target_rebalances", "entries must be positive");
                if (i > 0 && !(cfg.target_rebalances[i] > cfg.target_rebalances[i - 1])) {
                    fail_key("strategy.target_rebalances", "must be strictly increasing");
                }
            }
        }
    }
    cfg.pilot_paths = static_cast<std::size_t>(get_u64("strategy.pilot_paths"));
    if (cfg.pilot_paths < 2) fail_key("strategy.pilot_paths", "must be at least 2");
    const std::uint64_t pilot_G = get_u64("strategy.pilot_G");
    if (!is_power_of_two(pilot_G) || pilot_G > (1ULL << 28)) fail_key("strategy.pilot_G", "must be a power of two in [2, 2^28]");
    cfg.pilot_G = static_cast<std::size_t>(pilot_G);

    if (cfg.runs_equidistant()) {
        for (const double v : get_number_list("strategy.n_schedule")) {
            if (!(v >= 1.0) || v != std::floor(v)) fail_key("strategy.n_schedule", "entries must be positive integers");
            const auto n = static_cast<std::size_t>(v);
            if (cfg.grid_G % n != 0) fail_key("strategy.n_schedule", std::to_string(n) + " does not divide grid.G");
            if (!cfg.n_schedule.empty() && n <= cfg.n_schedule.back()) fail_key("strategy.n_schedule", "must be strictly increasing");
            cfg.n_schedule.push_back(n);
        }
    }

    const std::string& shares = value("strategy.shares_mode");
    if (shares == "oracle") {
        cfg.shares = SharesMode::Oracle;
    } else if (shares == "implementable") {
        cfg.shares = SharesMode::Implementable;
    } else {
        fail_key("strategy.shares_mode", "expected oracle or implementable");
    }
    cfg.min_steps = get_number("strategy.min_steps");
    if (!(cfg.min_steps > 0.0)) fail_key("strategy.min_steps", "must be positive");

    const std::string& match = value("frontier.match_effort");
    if (match != "true" && match != "false") fail_key("frontier.match_effort", "expected true or false");
    cfg.match_effort = match == "true";

    if (has("output.path")) cfg.output_path = value("output.path");

    time_invariant_ = true;
    for (const char* key : {"model.r", "model.pi", "model.c", "model.mu", "model.Sigma", "model.sigma",
                            "model.q_weight", "model.n_weight"}) {
        if (!has(key)) continue;
        for (const auto& row : split(value(key), ';')) {
            for (const auto& item : split(row, ',')) {
                if (get_expr(key, item, kVarT | kVarS | kVarV).used_vars() & kVarT) time_invariant_ = false;
            }
        }
    }
    validate_model_on_grid(cfg);

    for (const auto& [key, raw] : raw_) {
        cfg.entries[key] = key == "output.path" ? raw.value : strip_spaces(raw.value);
    }
    return cfg;
}

} // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
    return Builder(text, source).build();
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace rebal
