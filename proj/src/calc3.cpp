#include "nonholo/calc3.hpp"

#include <cmath>

#include "nonholo/errors.hpp"

namespace nonholo {

Vec3 riesz(const OneForm& beta, const Vec3& p) {
    return {beta.b1.eval(p), beta.b2.eval(p), beta.b3.eval(p)};
}

FormJet form_jet(const OneForm& beta, const Vec3& p) {
    auto [v1, g1] = beta.b1.eval_grad(p);
    auto [v2, g2] = beta.b2.eval_grad(p);
    auto [v3, g3] = beta.b3.eval_grad(p);
    return {{v1, v2, v3}, {g1, g2, g3}};
}

TwoFormAt exterior_derivative(const OneForm& beta, const Vec3& p) {
    FormJet j = form_jet(beta, p);
    // axial = curl b: (d2 b3 - d3 b2, d3 b1 - d1 b3, d1 b2 - d2 b1)
    return {{j.jacobian[2].x2 - j.jacobian[1].x3,
             j.jacobian[0].x3 - j.jacobian[2].x1,
             j.jacobian[1].x1 - j.jacobian[0].x2}};
}

double lambda_beta(const OneForm& beta, const Vec3& p) {
    FormJet j = form_jet(beta, p);
    Vec3 curl{j.jacobian[2].x2 - j.jacobian[1].x3,
              j.jacobian[0].x3 - j.jacobian[2].x1,
              j.jacobian[1].x1 - j.jacobian[0].x2};
    return dot(j.value, curl);
}

Vec3 dual_of_wedge_at(const Vec3& v1, const Vec3& v2) { return cross(v1, v2); }

Vec3 dual_of_wedge(const OneForm& tau1, const OneForm& tau2, const Vec3& p) {
    return cross(riesz(tau1, p), riesz(tau2, p));
}

double duality_residual(const Vec3& alpha, const Vec3& tau1, const Vec3& tau2) {
    // determinant by Sarrus expansion: an independent route, not the cross
    // product rearranged, so rounding patterns differ
    double det = alpha.x1 * tau1.x2 * tau2.x3 + alpha.x2 * tau1.x3 * tau2.x1 +
                 alpha.x3 * tau1.x1 * tau2.x2 - alpha.x3 * tau1.x2 * tau2.x1 -
                 alpha.x1 * tau1.x3 * tau2.x2 - alpha.x2 * tau1.x1 * tau2.x3;
    return det - dot(alpha, cross(tau1, tau2));
}

Vec3 factor_tau_at(const Vec3& vbeta, const Vec3& X, double tol) {
    double nb = norm(vbeta);
    if (nb < tol) throw DegenerateForm("constraint form vanishes at the query point");
    double t = dot(vbeta, X);
    if (std::abs(t) > tol * (norm(X) * nb + 1e-300))
        throw NotTangent("beta(X) = " + std::to_string(t));
    // V_beta x ((X x V_beta)/|V_beta|^2) = X - (beta(X)/|V|^2) V_beta = X under the precondition
    return cross(X, vbeta) / (nb * nb);
}

Vec3 factor_tau(const OneForm& beta, const Vec3& X, const Vec3& p, double tol) {
    return factor_tau_at(riesz(beta, p), X, tol);
}

Vec3 conserving_field(const OneForm& beta, const Expr& F, const Expr& c, const Vec3& p) {
    auto [fv, gradF] = F.eval_grad(p);
    (void)fv;
    return c.eval(p) * cross(riesz(beta, p), gradF);
}

} // namespace nonholo
