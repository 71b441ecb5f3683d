#ifndef NONHOLO_EXPR_HPP
#define NONHOLO_EXPR_HPP

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nonholo/errors.hpp"
#include "nonholo/vec3.hpp"

namespace nonholo {

// Forward-mode dual number carrying a value and its three partials
// d/dx1, d/dx2, d/dx3.  Product and chain rules hold exactly (to rounding).
struct Dual3 {
    double v = 0.0;
    Vec3 d{};

    static Dual3 constant(double c) { return {c, {0, 0, 0}}; }
    static Dual3 variable(int i, double x) {
        Dual3 r{x, {0, 0, 0}};
        r.d[i] = 1.0;
        return r;
    }
};

Dual3 operator+(const Dual3& a, const Dual3& b);
Dual3 operator-(const Dual3& a, const Dual3& b);
Dual3 operator-(const Dual3& a);
Dual3 operator*(const Dual3& a, const Dual3& b);
Dual3 operator/(const Dual3& a, const Dual3& b);
Dual3 dual_pow(const Dual3& a, double exponent);
Dual3 dual_sin(const Dual3& a);
Dual3 dual_cos(const Dual3& a);
Dual3 dual_tan(const Dual3& a);
Dual3 dual_exp(const Dual3& a);
Dual3 dual_ln(const Dual3& a);
Dual3 dual_sqrt(const Dual3& a);
Dual3 dual_atan2(const Dual3& y, const Dual3& x);

// Scalar field in the variables x1, x2, x3, stored as an immutable AST.
// Cheap to copy; evaluation is pure and thread-safe.
class Expr {
public:
    Expr() = default;

    // Parses with the precedence order  ^  >  unary -  >  * /  >  + -,
    // `^` right-associative with a numeric exponent.  Whitespace-insensitive.
    // Throws SyntaxError (with position) or UnknownIdentifier.
    static Expr parse(const std::string& text);

    double eval(const Vec3& p) const;

    // Value and exact gradient via dual numbers.
    std::pair<double, Vec3> eval_grad(const Vec3& p) const;

    // Canonical text form; parse(print()) is structurally identical.
    std::string print() const;

    bool structurally_equal(const Expr& other) const;

    bool empty() const { return nodes_ == nullptr; }

    enum class Op {
        Var, Const, Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Tan, Exp, Ln, Sqrt, Atan2
    };

    struct Node {
        Op op;
        int a = -1;      // left / only child
        int b = -1;      // right child (Atan2 second argument)
        double value = 0; // Const value, Pow exponent, Var index
    };

private:
    std::shared_ptr<const std::vector<Node>> nodes_; // root is the last node

    template <class T> T eval_t(const Vec3& p) const;
    friend class Parser;
};

} // namespace nonholo

#endif
