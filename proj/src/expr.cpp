#include "nonholo/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>

namespace nonholo {

Dual3 operator+(const Dual3& a, const Dual3& b) { return {a.v + b.v, a.d + b.d}; }
Dual3 operator-(const Dual3& a, const Dual3& b) { return {a.v - b.v, a.d - b.d}; }
Dual3 operator-(const Dual3& a) { return {-a.v, -a.d}; }
Dual3 operator*(const Dual3& a, const Dual3& b) { return {a.v * b.v, a.d * b.v + b.d * a.v}; }

Dual3 operator/(const Dual3& a, const Dual3& b) {
    if (b.v == 0.0) throw DomainError("division by zero");
    double inv = 1.0 / b.v;
    return {a.v * inv, (a.d - (a.v * inv) * b.d) * inv};
}

Dual3 dual_pow(const Dual3& a, double e) {
    if (e == 0.0) return Dual3::constant(1.0);
    if (e == 1.0) return a;
    if (a.v == 0.0 && e < 1.0) throw DomainError("pow: non-differentiable at zero base");
    if (a.v < 0.0 && e != std::floor(e)) throw DomainError("pow: negative base, fractional exponent");
    double v = std::pow(a.v, e);
    double dv = e * std::pow(a.v, e - 1.0);
    return {v, dv * a.d};
}

Dual3 dual_sin(const Dual3& a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
Dual3 dual_cos(const Dual3& a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }

Dual3 dual_tan(const Dual3& a) {
    double c = std::cos(a.v);
    if (c == 0.0) throw DomainError("tan: pole");
    double t = std::tan(a.v);
    return {t, (1.0 + t * t) * a.d};
}

Dual3 dual_exp(const Dual3& a) {
    double v = std::exp(a.v);
    return {v, v * a.d};
}

Dual3 dual_ln(const Dual3& a) {
    if (a.v <= 0.0) throw DomainError("ln: non-positive argument");
    return {std::log(a.v), (1.0 / a.v) * a.d};
}

Dual3 dual_sqrt(const Dual3& a) {
    if (a.v < 0.0) throw DomainError("sqrt: negative argument");
    if (a.v == 0.0) throw DomainError("sqrt: non-differentiable at zero");
    double v = std::sqrt(a.v);
    return {v, (0.5 / v) * a.d};
}

Dual3 dual_atan2(const Dual3& y, const Dual3& x) {
    double r2 = x.v * x.v + y.v * y.v;
    if (r2 == 0.0) throw DomainError("atan2: both arguments zero");
    return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / r2};
}

namespace {

// double-backed scalar with the same entry points the evaluator uses
inline double pow_s(double a, double e) {
    if (a < 0.0 && e != std::floor(e)) throw DomainError("pow: negative base, fractional exponent");
    return std::pow(a, e);
}
inline double div_s(double a, double b) {
    if (b == 0.0) throw DomainError("division by zero");
    return a / b;
}
inline double ln_s(double a) {
    if (a <= 0.0) throw DomainError("ln: non-positive argument");
    return std::log(a);
}
inline double sqrt_s(double a) {
    if (a < 0.0) throw DomainError("sqrt: negative argument");
    return std::sqrt(a);
}
inline double tan_s(double a) {
    if (std::cos(a) == 0.0) throw DomainError("tan: pole");
    return std::tan(a);
}
inline double atan2_s(double y, double x) {
    if (x == 0.0 && y == 0.0) throw DomainError("atan2: both arguments zero");
    return std::atan2(y, x);
}

struct Token {
    enum Kind { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End } kind;
    double num = 0;
    std::string ident;
    size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { advance(); }
    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        tok_.pos = i_;
        if (i_ >= s_.size()) { tok_.kind = Token::End; return; }
        char c = s_[i_];
        switch (c) {
            case '+': tok_.kind = Token::Plus; ++i_; return;
            case '-': tok_.kind = Token::Minus; ++i_; return;
            case '*': tok_.kind = Token::Star; ++i_; return;
            case '/': tok_.kind = Token::Slash; ++i_; return;
            case '^': tok_.kind = Token::Caret; ++i_; return;
            case '(': tok_.kind = Token::LParen; ++i_; return;
            case ')': tok_.kind = Token::RParen; ++i_; return;
            case ',': tok_.kind = Token::Comma; ++i_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t end = i_;
            double v = 0;
            auto res = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
            if (res.ec != std::errc()) throw SyntaxError("bad number at position " + std::to_string(i_));
            end = static_cast<size_t>(res.ptr - s_.data());
            tok_.kind = Token::Num;
            tok_.num = v;
            i_ = end;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i_;
            while (j < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
                ++j;
            tok_.kind = Token::Ident;
            tok_.ident = s_.substr(i_, j - i_);
            i_ = j;
            return;
        }
        throw SyntaxError(std::string("unexpected character '") + c + "' at position " +
                          std::to_string(i_));
    }

    const std::string& s_;
    size_t i_ = 0;
    Token tok_;
};

} // namespace

class Parser {
public:
    explicit Parser(const std::string& text) : lex_(text) {}

    Expr run() {
        int root = parse_sum();
        expect(Token::End, "end of input");
        (void)root; // root is nodes_.back() by construction
        Expr e;
        e.nodes_ = std::make_shared<const std::vector<Expr::Node>>(std::move(nodes_));
        return e;
    }

private:
    using Op = Expr::Op;

    int push(Expr::Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void expect(Token::Kind k, const char* what) {
        if (lex_.peek().kind != k)
            throw SyntaxError(std::string("expected ") + what + " at position " +
                              std::to_string(lex_.peek().pos));
        lex_.take();
    }

    int parse_sum() {
        int lhs = parse_product();
        for (;;) {
            auto k = lex_.peek().kind;
            if (k == Token::Plus || k == Token::Minus) {
                lex_.take();
                int rhs = parse_product();
                lhs = push({k == Token::Plus ? Op::Add : Op::Sub, lhs, rhs, 0});
            } else {
                return lhs;
            }
        }
    }

    int parse_product() {
        int lhs = parse_unary();
        for (;;) {
            auto k = lex_.peek().kind;
            if (k == Token::Star || k == Token::Slash) {
                lex_.take();
                int rhs = parse_unary();
                lhs = push({k == Token::Star ? Op::Mul : Op::Div, lhs, rhs, 0});
            } else {
                return lhs;
            }
        }
    }

    int parse_unary() {
        if (lex_.peek().kind == Token::Minus) {
            lex_.take();
            int a = parse_unary(); // power binds tighter: -x^2 parses inside
            return push({Op::Neg, a, -1, 0});
        }
        return parse_power();
    }

    int parse_power() {
        int base = parse_atom();
        if (lex_.peek().kind == Token::Caret) {
            lex_.take();
            double e = parse_numeric_exponent();
            return push({Op::Pow, base, -1, e});
        }
        return base;
    }

    // `^` takes a literal (optionally negated, optionally parenthesized)
    // exponent; chains like 2^3^2 associate to the right and fold numerically.
    double parse_numeric_exponent() {
        bool neg = false;
        while (lex_.peek().kind == Token::Minus) {
            lex_.take();
            neg = !neg;
        }
        double v;
        if (lex_.peek().kind == Token::Num) {
            v = lex_.take().num;
        } else if (lex_.peek().kind == Token::LParen) {
            lex_.take();
            v = parse_numeric_exponent();
            expect(Token::RParen, "')'");
        } else {
            throw SyntaxError("expected numeric exponent at position " +
                              std::to_string(lex_.peek().pos));
        }
        if (lex_.peek().kind == Token::Caret) {
            lex_.take();
            v = std::pow(v, parse_numeric_exponent());
        }
        return neg ? -v : v;
    }

    int parse_atom() {
        Token t = lex_.take();
        switch (t.kind) {
            case Token::Num:
                return push({Op::Const, -1, -1, t.num});
            case Token::LParen: {
                int e = parse_sum();
                expect(Token::RParen, "')'");
                return e;
            }
            case Token::Ident:
                return parse_ident(t);
            case Token::Minus: // only reachable inside exponents; elsewhere handled by unary
            default:
                throw SyntaxError("expected value at position " + std::to_string(t.pos));
        }
    }

    int parse_ident(const Token& t) {
        const std::string& id = t.ident;
        if (id == "x1" || id == "x2" || id == "x3") {
            return push({Op::Var, -1, -1, static_cast<double>(id[1] - '1')});
        }
        if (id == "pi" || id == "PI") return push({Op::Const, -1, -1, M_PI});

        Op fn;
        if (id == "sin") fn = Op::Sin;
        else if (id == "cos") fn = Op::Cos;
        else if (id == "tan") fn = Op::Tan;
        else if (id == "exp") fn = Op::Exp;
        else if (id == "ln" || id == "log") fn = Op::Ln;
        else if (id == "sqrt") fn = Op::Sqrt;
        else if (id == "atan2") fn = Op::Atan2;
        else throw UnknownIdentifier("'" + id + "' at position " + std::to_string(t.pos));

        expect(Token::LParen, "'(' after function name");
        int a = parse_sum();
        int b = -1;
        if (fn == Op::Atan2) {
            expect(Token::Comma, "',' between atan2 arguments");
            b = parse_sum();
        }
        expect(Token::RParen, "')'");
        return push({fn, a, b, 0});
    }

    Lexer lex_;
    std::vector<Expr::Node> nodes_;
};

Expr Expr::parse(const std::string& text) { return Parser(text).run(); }

template <class T>
struct ScalarOps;

template <>
struct ScalarOps<double> {
    static double var(int i, const Vec3& p) { return p[i]; }
    static double constant(double c) { return c; }
    static double pow(double a, double e) { return pow_s(a, e); }
    static double div(double a, double b) { return div_s(a, b); }
    static double sin(double a) { return std::sin(a); }
    static double cos(double a) { return std::cos(a); }
    static double tan(double a) { return tan_s(a); }
    static double exp(double a) { return std::exp(a); }
    static double ln(double a) { return ln_s(a); }
    static double sqrt(double a) { return sqrt_s(a); }
    static double atan2(double y, double x) { return atan2_s(y, x); }
};

template <>
struct ScalarOps<Dual3> {
    static Dual3 var(int i, const Vec3& p) { return Dual3::variable(i, p[i]); }
    static Dual3 constant(double c) { return Dual3::constant(c); }
    static Dual3 pow(const Dual3& a, double e) { return dual_pow(a, e); }
    static Dual3 div(const Dual3& a, const Dual3& b) { return a / b; }
    static Dual3 sin(const Dual3& a) { return dual_sin(a); }
    static Dual3 cos(const Dual3& a) { return dual_cos(a); }
    static Dual3 tan(const Dual3& a) { return dual_tan(a); }
    static Dual3 exp(const Dual3& a) { return dual_exp(a); }
    static Dual3 ln(const Dual3& a) { return dual_ln(a); }
    static Dual3 sqrt(const Dual3& a) { return dual_sqrt(a); }
    static Dual3 atan2(const Dual3& y, const Dual3& x) { return dual_atan2(y, x); }
};

namespace {

template <class T, class S, class NodeT>
T eval_nodes(const std::vector<NodeT>& ns, const Vec3& p, T* vals) {
    using Op = Expr::Op;
    for (size_t i = 0; i < ns.size(); ++i) {
        const NodeT& n = ns[i];
        switch (n.op) {
            case Op::Var: vals[i] = S::var(static_cast<int>(n.value), p); break;
            case Op::Const: vals[i] = S::constant(n.value); break;
            case Op::Add: vals[i] = vals[n.a] + vals[n.b]; break;
            case Op::Sub: vals[i] = vals[n.a] - vals[n.b]; break;
            case Op::Mul: vals[i] = vals[n.a] * vals[n.b]; break;
            case Op::Div: vals[i] = S::div(vals[n.a], vals[n.b]); break;
            case Op::Pow: vals[i] = S::pow(vals[n.a], n.value); break;
            case Op::Neg: vals[i] = -vals[n.a]; break;
            case Op::Sin: vals[i] = S::sin(vals[n.a]); break;
            case Op::Cos: vals[i] = S::cos(vals[n.a]); break;
            case Op::Tan: vals[i] = S::tan(vals[n.a]); break;
            case Op::Exp: vals[i] = S::exp(vals[n.a]); break;
            case Op::Ln: vals[i] = S::ln(vals[n.a]); break;
            case Op::Sqrt: vals[i] = S::sqrt(vals[n.a]); break;
            case Op::Atan2: vals[i] = S::atan2(vals[n.a], vals[n.b]); break;
        }
    }
    return vals[ns.size() - 1];
}

} // namespace

template <class T>
T Expr::eval_t(const Vec3& p) const {
    if (!nodes_) throw FieldError("empty expression");
    using S = ScalarOps<T>;
    const auto& ns = *nodes_;
    if (ns.size() <= 64) {
        T scratch[64];
        return eval_nodes<T, S>(ns, p, scratch);
    }
    std::vector<T> scratch(ns.size());
    return eval_nodes<T, S>(ns, p, scratch.data());
}

double Expr::eval(const Vec3& p) const { return eval_t<double>(p); }

std::pair<double, Vec3> Expr::eval_grad(const Vec3& p) const {
    Dual3 r = eval_t<Dual3>(p);
    return {r.v, r.d};
}

namespace {

void print_node(const std::vector<Expr::Node>& ns, int i, std::string& out) {
    using Op = Expr::Op;
    const Expr::Node& n = ns[i];
    auto paren = [&](int child) {
        out += '(';
        print_node(ns, child, out);
        out += ')';
    };
    char buf[32];
    switch (n.op) {
        case Op::Var:
            out += (n.value == 0 ? "x1" : n.value == 1 ? "x2" : "x3");
            break;
        case Op::Const:
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            break;
        case Op::Add: paren(n.a); out += '+'; paren(n.b); break;
        case Op::Sub: paren(n.a); out += '-'; paren(n.b); break;
        case Op::Mul: paren(n.a); out += '*'; paren(n.b); break;
        case Op::Div: paren(n.a); out += '/'; paren(n.b); break;
        case Op::Pow:
            paren(n.a);
            out += '^';
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            if (n.value < 0) { out += '('; out += buf; out += ')'; }
            else out += buf;
            break;
        case Op::Neg: out += "-"; paren(n.a); break;
        case Op::Sin: out += "sin"; paren(n.a); break;
        case Op::Cos: out += "cos"; paren(n.a); break;
        case Op::Tan: out += "tan"; paren(n.a); break;
        case Op::Exp: out += "exp"; paren(n.a); break;
        case Op::Ln: out += "ln"; paren(n.a); break;
        case Op::Sqrt: out += "sqrt"; paren(n.a); break;
        case Op::Atan2:
            out += "atan2(";
            print_node(ns, n.a, out);
            out += ',';
            print_node(ns, n.b, out);
            out += ')';
            break;
    }
}

bool node_equal(const std::vector<Expr::Node>& a, int ia,
                const std::vector<Expr::Node>& b, int ib) {
    const auto& na = a[ia];
    const auto& nb = b[ib];
    if (na.op != nb.op || na.value != nb.value) return false;
    if ((na.a >= 0) != (nb.a >= 0) || (na.b >= 0) != (nb.b >= 0)) return false;
    if (na.a >= 0 && !node_equal(a, na.a, b, nb.a)) return false;
    if (na.b >= 0 && !node_equal(a, na.b, b, nb.b)) return false;
    return true;
}

} // namespace

std::string Expr::print() const {
    if (!nodes_) return "";
    std::string out;
    print_node(*nodes_, static_cast<int>(nodes_->size()) - 1, out);
    return out;
}

bool Expr::structurally_equal(const Expr& other) const {
    if (!nodes_ || !other.nodes_) return nodes_ == other.nodes_;
    return node_equal(*nodes_, static_cast<int>(nodes_->size()) - 1,
                      *other.nodes_, static_cast<int>(other.nodes_->size()) - 1);
}

} // namespace nonholo
