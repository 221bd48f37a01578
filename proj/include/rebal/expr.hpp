#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rebal {

/// Variables an expression may reference.
enum ExprVars : unsigned {
    kVarT = 1u << 0, // time
    kVarV = 1u << 1, // wealth
    kVarS = 1u << 2, // prices S1..Sd (S alone when d = 1)
};

/**
 * Scalar expression used for coefficient functions in config files.
 *
 * Grammar: numbers, the variables enabled by the caller, + - * / ^, unary
 * minus, parentheses and the functions exp, sin, cos, log, sqrt, abs.
 * Compiled once to a postfix program. Expressions without variables are
 * folded to a constant.
 */
class Expr {
public:
    Expr() = default;

    /// Throws Error(ConfigError) describing the column of the first problem.
    static Expr parse(std::string_view text, int num_assets, unsigned allowed_vars);
    static Expr constant(double value);

    double eval(double t, std::span<const double> s = {}, double v = 0.0) const;

    bool is_constant() const noexcept { return constant_; }
    double constant_value() const noexcept { return value_; }
    const std::string& text() const noexcept { return text_; }
    unsigned used_vars() const noexcept { return used_; }

private:
    enum class Kind : std::uint8_t { Push, VarT, VarV, VarS, Neg, Add, Sub, Mul, Div, Pow, Exp, Sin, Cos, Log, Sqrt, Abs };
    struct Op {
        Kind kind;
        double value;
        int index;
    };
    friend class ExprParser;

    std::vector<Op> code_;
    std::string text_;
    double value_ = 0.0;
    bool constant_ = true;
    unsigned used_ = 0;
};

} // namespace rebal
