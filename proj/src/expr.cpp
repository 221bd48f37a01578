#include "rebal/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "rebal/error.hpp"

namespace rebal {

namespace {
constexpr int kMaxStack = 64;
}

class ExprParser {
public:
    ExprParser(std::string_view text, int num_assets, unsigned allowed)
        : text_(text), num_assets_(num_assets), allowed_(allowed) {}

    Expr run() {
        Expr e;
        out_ = &e;
        skip_ws();
        if (pos_ >= text_.size()) fail("empty expression");
        parse_sum();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        if (max_depth_ > kMaxStack) fail("expression too deep");
        e.text_ = std::string(text_);
        e.constant_ = false;
        if (e.used_ == 0) {
            e.value_ = e.eval(0.0);
            e.constant_ = true;
            e.code_ = {{Expr::Kind::Push, e.value_, 0}};
        }
        return e;
    }

private:
    using Kind = Expr::Kind;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorCode::ConfigError,
                    "expression '" + std::string(text_) + "' column " + std::to_string(pos_ + 1) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void emit(Kind k, int stack_delta, double value = 0.0, int index = 0) {
        out_->code_.push_back({k, value, index});
        depth_ += stack_delta;
        max_depth_ = std::max(max_depth_, depth_);
    }

    void parse_sum() {
        parse_product();
        for (;;) {
            if (accept('+')) {
                parse_product();
                emit(Kind::Add, -1);
            } else if (accept('-')) {
                parse_product();
                emit(Kind::Sub, -1);
            } else {
                return;
            }
        }
    }

    void parse_product() {
        parse_unary();
        for (;;) {
            if (accept('*')) {
                parse_unary();
                emit(Kind::Mul, -1);
            } else if (accept('/')) {
                parse_unary();
                emit(Kind::Div, -1);
            } else {
                return;
            }
        }
    }

    void parse_unary() {
        if (accept('-')) {
            parse_unary();
            emit(Kind::Neg, 0);
        } else if (accept('+')) {
            parse_unary();
        } else {
            parse_power();
        }
    }

    // Right associative; binds tighter than unary minus on its left operand only.
    void parse_power() {
        parse_primary();
        if (accept('^')) {
            parse_unary();
            emit(Kind::Pow, -1);
        }
    }

    void use_var(unsigned var, const char* name) {
        if ((allowed_ & var) == 0) fail(std::string("variable '") + name + "' not allowed here");
        out_->used_ |= var;
    }

    void parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            parse_sum();
            if (!accept(')')) fail("missing ')'");
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            const char* begin = text_.data() + pos_;
            const auto [ptr, ec] = std::from_chars(begin, text_.data() + text_.size(), v);
            if (ec != std::errc()) fail("bad number");
            pos_ += static_cast<std::size_t>(ptr - begin);
            emit(Kind::Push, +1, v);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string name(text_.substr(start, pos_ - start));
            if (accept('(')) {
                parse_sum();
                if (!accept(')')) fail("missing ')' after argument of " + name);
                if (name == "exp") emit(Kind::Exp, 0);
                else if (name == "sin") emit(Kind::Sin, 0);
                else if (name == "cos") emit(Kind::Cos, 0);
                else if (name == "log") emit(Kind::Log, 0);
                else if (name == "sqrt") emit(Kind::Sqrt, 0);
                else if (name == "abs") emit(Kind::Abs, 0);
                else fail("unknown function '" + name + "'");
                return;
            }
            if (name == "t") {
                use_var(kVarT, "t");
                emit(Kind::VarT, +1);
            } else if (name == "V") {
                use_var(kVarV, "V");
                emit(Kind::VarV, +1);
            } else if (name == "S" && num_assets_ == 1) {
                use_var(kVarS, "S");
                emit(Kind::VarS, +1, 0.0, 0);
            } else if (name.size() > 1 && name[0] == 'S') {
                int idx = 0;
                const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
                if (ec != std::errc() || ptr != name.data() + name.size() || idx < 1 || idx > num_assets_) {
                    fail("unknown price variable '" + name + "'");
                }
                use_var(kVarS, "S");
                emit(Kind::VarS, +1, 0.0, idx - 1);
            } else {
                fail("unknown identifier '" + name + "'");
            }
            return;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::string_view text_;
    int num_assets_;
    unsigned allowed_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    int max_depth_ = 0;
    Expr* out_ = nullptr;
};

Expr Expr::parse(std::string_view text, int num_assets, unsigned allowed_vars) {
    return ExprParser(text, num_assets, allowed_vars).run();
}

Expr Expr::constant(double value) {
    Expr e;
    e.code_ = {{Kind::Push, value, 0}};
    e.value_ = value;
    e.constant_ = true;
    e.text_ = std::to_string(value);
    return e;
}

double Expr::eval(double t, std::span<const double> s, double v) const {
    if (constant_) return value_;
    std::array<double, kMaxStack> st;
    int top = -1;
    for (const Op& op : code_) {
        switch (op.kind) {
        case Kind::Push: st[++top] = op.value; break;
        case Kind::VarT: st[++top] = t; break;
        case Kind::VarV: st[++top] = v; break;
        case Kind::VarS: st[++top] = s[static_cast<std::size_t>(op.index)]; break;
        case Kind::Neg: st[top] = -st[top]; break;
        case Kind::Add: st[top - 1] += st[top]; --top; break;
        case Kind::Sub: st[top - 1] -= st[top]; --top; break;
        case Kind::Mul: st[top - 1] *= st[top]; --top; break;
        case Kind::Div: st[top - 1] /= st[top]; --top; break;
        case Kind::Pow: st[top - 1] = std::pow(st[top - 1], st[top]); --top; break;
        case Kind::Exp: st[top] = std::exp(st[top]); break;
        case Kind::Sin: st[top] = std::sin(st[top]); break;
        case Kind::Cos: st[top] = std::cos(st[top]); break;
        case Kind::Log: st[top] = std::log(st[top]); break;
        case Kind::Sqrt: st[top] = std::sqrt(st[top]); break;
        case Kind::Abs: st[top] = std::abs(st[top]); break;
        }
    }
    return st[0];
}

} // namespace rebal
