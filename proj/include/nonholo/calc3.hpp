#ifndef NONHOLO_CALC3_HPP
#define NONHOLO_CALC3_HPP

#include <array>

#include "nonholo/expr.hpp"
#include "nonholo/vec3.hpp"

namespace nonholo {

// Differential 1-form  b1 dx1 + b2 dx2 + b3 dx3  with Expr coefficients.
struct OneForm {
    Expr b1, b2, b3;

    static OneForm parse(const std::string& c1, const std::string& c2, const std::string& c3) {
        return {Expr::parse(c1), Expr::parse(c2), Expr::parse(c3)};
    }
};

// Value of a 2-form at a point, stored through its axial vector
// (Hodge proxy w.r.t. dx1^dx2^dx3): axial = (w_23, w_31, w_12).
struct TwoFormAt {
    Vec3 axial;

    double entry(int i, int j) const {
        if (i == j) return 0.0;
        if (i == 1 && j == 2) return axial.x1;
        if (i == 2 && j == 1) return -axial.x1;
        if (i == 2 && j == 0) return axial.x2;
        if (i == 0 && j == 2) return -axial.x2;
        if (i == 0 && j == 1) return axial.x3;
        return -axial.x3;
    }

    // w(u, v) = axial . (u x v)
    double apply(const Vec3& u, const Vec3& v) const { return dot(axial, cross(u, v)); }
};

// V_beta: the vector field whose components are the form's coefficients.
Vec3 riesz(const OneForm& beta, const Vec3& p);

// Coefficient values and the 3x3 Jacobian J[i] = grad b_{i+1}.
struct FormJet {
    Vec3 value;
    std::array<Vec3, 3> jacobian;
};
FormJet form_jet(const OneForm& beta, const Vec3& p);

// d(beta) at p; axial vector is curl of the coefficient field.
TwoFormAt exterior_derivative(const OneForm& beta, const Vec3& p);

// beta ^ d(beta) = lambda_beta * dx1^dx2^dx3; the non-holonomicity scalar.
double lambda_beta(const OneForm& beta, const Vec3& p);

// Vector field dual to tau1 ^ tau2 under the standard volume form:
// X = V_{tau1} x V_{tau2};  alpha ^ tau1 ^ tau2 = alpha(X) * Omega for all alpha.
Vec3 dual_of_wedge(const OneForm& tau1, const OneForm& tau2, const Vec3& p);
Vec3 dual_of_wedge_at(const Vec3& v1, const Vec3& v2);

// Pointwise duality defect  det[alpha; tau1; tau2] - alpha . (V1 x V2);
// zero (to rounding) by the determinant identity.
double duality_residual(const Vec3& alpha, const Vec3& tau1, const Vec3& tau2);

// Given X with beta(X) = 0, produce V_tau with V_beta x V_tau = X.
// Throws NotTangent / DegenerateForm on violated preconditions.
Vec3 factor_tau(const OneForm& beta, const Vec3& X, const Vec3& p, double tol = 1e-9);
Vec3 factor_tau_at(const Vec3& vbeta, const Vec3& X, double tol = 1e-9);

// Y = c(p) * (V_beta x grad F): motion subject to beta = 0 preserving F.
Vec3 conserving_field(const OneForm& beta, const Expr& F, const Expr& c, const Vec3& p);

} // namespace nonholo

#endif
