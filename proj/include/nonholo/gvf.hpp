#ifndef NONHOLO_GVF_HPP
#define NONHOLO_GVF_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "nonholo/scene.hpp"

namespace nonholo {

// Weight strategy for the guiding field.
struct WeightSpec {
    struct Default {};                       // abar = lambda_beta, bbar = H
    struct Custom { Expr a, b; };
    struct Robust { Expr b; double eps0 = 1e-2; int sample_budget = 2000; };
    std::variant<Default, Custom, Robust> spec = Default{};

    static WeightSpec make_default() { return {}; }
    static WeightSpec custom(Expr a, Expr b) { return {Custom{std::move(a), std::move(b)}}; }
    static WeightSpec robust(Expr b, double eps0, int budget) {
        return {Robust{std::move(b), eps0, budget}};
    }
};

// Everything the field formula needs at one point.
struct FieldFrame {
    double f = 0, g = 0, H = 0;
    Vec3 grad_f, grad_g, grad_H, vbeta, T;
    double beta_T = 0;   // beta(T) = <V_beta, T>
};

struct WeightReport {
    bool sign_ok = false;        // abar * lambda_beta > 0 on tube samples
    bool positivity_ok = false;  // bbar > 0 on tube minus path
    bool bounded_ok = false;     // bbar / H shows no divergence across annuli
    double min_a_lambda = 0;
    double min_b = 0;
    double max_b_over_H = 0;
    double annuli_spread = 0;    // max/min of per-annulus max(bbar/H)
    Vec3 witness_sign{}, witness_positivity{}, witness_bounded{};
    bool all_pass() const { return sign_ok && positivity_ok && bounded_ok; }
};

// The assembled field  X = abar * Vb x gradH + bbar * Vb x (T x gradH).
// Immutable; evaluation is pure.  Holds a pointer to the (outliving) scene.
class GuidingField {
public:
    GuidingField(const Scene& scene, WeightSpec spec);

    // Pre-resolved weights (used by the robust builder).
    GuidingField(const Scene& scene, std::function<double(const Vec3&)> a,
                 std::function<double(const Vec3&)> b, std::string describe)
        : scene_(&scene), a_(std::move(a)), b_(std::move(b)), describe_(std::move(describe)) {}

    const Scene& scene() const { return *scene_; }

    FieldFrame frame(const Vec3& p) const;

    double weight_a(const Vec3& p) const { return a_(p); }
    double weight_b(const Vec3& p) const { return b_(p); }

    Vec3 eval_field(const Vec3& p) const;
    Vec3 winding_component(const Vec3& p) const;
    Vec3 convergence_component(const Vec3& p) const;

    // Closed form -bbar * beta(T) * |gradH|^2, cross-checked against
    // gradH . X; MismatchBug if they disagree beyond 1e-10 relative.
    double dH_along(const Vec3& p) const;

    // Base angular speed  dphi(w) = (f dg(w) - g df(w)) / H  at p.
    double dphi_of(const Vec3& p, const Vec3& w) const;

    // X / |dphi(X)|; unit base angular speed.  RescaleSingular when
    // |dphi(X)| < 1e-9 or H = 0.
    Vec3 time_rescale(const Vec3& p) const;

    WeightReport check_weights(int budget) const;

    // Description of the resolved strategy, for reports.
    std::string describe() const { return describe_; }

private:
    const Scene* scene_;
    std::function<double(const Vec3&)> a_, b_;
    std::string describe_;
};

GuidingField make_guiding_field(const Scene& scene, WeightSpec spec);

struct RobustWeights {
    std::function<double(const Vec3&)> a;
    Expr b;
    double S = 0;      // sampled supremum of the wedge-ratio
    double eps0 = 0;
    WeightReport report;
};

// abar = sign(lambda_beta) * ((|bbar| / |lambda_beta|) * S + eps0), with S the
// sampled supremum over the tube of
//   |beta^dbeta(gradH, T, r-lift)| / |beta^dbeta(T, phi-lift, r-lift)|,
// estimated on H-annuli [delta^2/2^k, delta^2/2^(k-1)], k = 1..12.
// Throws SupremumUnstable when the smallest-H annuli disagree by > 10x.
RobustWeights build_robust_weights(const Scene& scene, const Expr& bbar, double eps0,
                                   int sample_budget);

} // namespace nonholo

#endif
