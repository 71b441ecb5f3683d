#include "nonholo/gvf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nonholo/connection.hpp"
#include "nonholo/errors.hpp"

namespace nonholo {

GuidingField::GuidingField(const Scene& scene, WeightSpec spec) : scene_(&scene) {
    const Scene* sc = scene_;
    if (std::holds_alternative<WeightSpec::Default>(spec.spec)) {
        a_ = [sc](const Vec3& p) { return sc->constraint.lambda(p); };
        b_ = [sc](const Vec3& p) { return lyapunov_H(sc->loop, p); };
        describe_ = "default (a = lambda_beta, b = H)";
    } else if (auto* c = std::get_if<WeightSpec::Custom>(&spec.spec)) {
        Expr a = c->a, b = c->b;
        a_ = [a](const Vec3& p) { return a.eval(p); };
        b_ = [b](const Vec3& p) { return b.eval(p); };
        describe_ = "custom (a = " + a.print() + ", b = " + b.print() + ")";
    } else {
        auto& r = std::get<WeightSpec::Robust>(spec.spec);
        RobustWeights rw = build_robust_weights(scene, r.b, r.eps0, r.sample_budget);
        a_ = rw.a;
        Expr b = rw.b;
        b_ = [b](const Vec3& p) { return b.eval(p); };
        std::ostringstream os;
        os << "robust (b = " << b.print() << ", S = " << rw.S << ", eps0 = " << rw.eps0 << ")";
        describe_ = os.str();
    }
}

GuidingField make_guiding_field(const Scene& scene, WeightSpec spec) {
    return GuidingField(scene, std::move(spec));
}

FieldFrame GuidingField::frame(const Vec3& p) const {
    FieldFrame fr;
    auto [fv, gf] = scene_->loop.f.eval_grad(p);
    auto [gv, gg] = scene_->loop.g.eval_grad(p);
    fr.f = fv;
    fr.g = gv;
    fr.grad_f = gf;
    fr.grad_g = gg;
    fr.H = fv * fv + gv * gv;
    fr.grad_H = 2.0 * (fv * gf + gv * gg);
    fr.vbeta = scene_->constraint.vbeta(p);
    fr.T = static_cast<double>(scene_->loop.orientation_sign) * cross(gf, gg);
    fr.beta_T = dot(fr.vbeta, fr.T);
    return fr;
}

Vec3 GuidingField::winding_component(const Vec3& p) const {
    FieldFrame fr = frame(p);
    return a_(p) * cross(fr.vbeta, fr.grad_H);
}

Vec3 GuidingField::convergence_component(const Vec3& p) const {
    FieldFrame fr = frame(p);
    return b_(p) * cross(fr.vbeta, cross(fr.T, fr.grad_H));
}

Vec3 GuidingField::eval_field(const Vec3& p) const {
    FieldFrame fr = frame(p);
    return a_(p) * cross(fr.vbeta, fr.grad_H) +
           b_(p) * cross(fr.vbeta, cross(fr.T, fr.grad_H));
}

double GuidingField::dH_along(const Vec3& p) const {
    FieldFrame fr = frame(p);
    double closed = -b_(p) * fr.beta_T * norm2(fr.grad_H);
    double direct = dot(fr.grad_H, eval_field(p));
    double scale = std::abs(closed) + std::abs(direct) + 1e-300;
    if (std::abs(closed - direct) > 1e-10 * scale + 1e-14)
        throw MismatchBug("dH along field: closed form " + std::to_string(closed) +
                          " vs direct " + std::to_string(direct));
    return closed;
}

double GuidingField::dphi_of(const Vec3& p, const Vec3& w) const {
    FieldFrame fr = frame(p);
    if (fr.H <= 0) throw RescaleSingular("base angle undefined on the path");
    double df_w = dot(fr.grad_f, w);
    double dg_w = dot(fr.grad_g, w);
    return (fr.f * dg_w - fr.g * df_w) / fr.H;
}

Vec3 GuidingField::time_rescale(const Vec3& p) const {
    FieldFrame fr = frame(p);
    if (fr.H <= 0) throw RescaleSingular("H = 0: rescale undefined on the path");
    Vec3 X = eval_field(p);
    double speed = std::abs(dphi_of(p, X));
    if (speed < 1e-9) throw RescaleSingular("|dphi(X)| = " + std::to_string(speed));
    return X / speed;
}

WeightReport GuidingField::check_weights(int budget) const {
    WeightReport rep;
    TubeSampler sampler(*scene_, scene_->numerics.rng_seed + 1);
    budget = std::max(budget, 100);

    rep.min_a_lambda = 1e300;
    rep.min_b = 1e300;
    for (int k = 0; k < budget; ++k) {
        Vec3 p = sampler.next();
        double al = a_(p) * scene_->constraint.lambda(p);
        if (al < rep.min_a_lambda) {
            rep.min_a_lambda = al;
            rep.witness_sign = p;
        }
        double H = lyapunov_H(scene_->loop, p);
        if (H > 1e-10) {
            double b = b_(p);
            if (b < rep.min_b) {
                rep.min_b = b;
                rep.witness_positivity = p;
            }
        }
    }
    rep.sign_ok = rep.min_a_lambda > 0;
    rep.positivity_ok = rep.min_b > 0;

    // boundedness trend of b/H on annuli H in [1e-8, 1e-2]
    double annulus_min = 1e300, annulus_max = 0;
    rep.max_b_over_H = 0;
    for (int d = -8; d <= -2; ++d) {
        double H0 = std::pow(10.0, d);
        if (H0 >= scene_->delta2()) continue;
        double worst = 0;
        Vec3 witness{};
        int n = std::max(8, budget / 16);
        for (int k = 0; k < n; ++k) {
            Vec3 p = sampler.next_at(H0);
            double H = lyapunov_H(scene_->loop, p);
            double ratio = b_(p) / H;
            if (ratio > worst) {
                worst = ratio;
                witness = p;
            }
        }
        annulus_min = std::min(annulus_min, worst);
        annulus_max = std::max(annulus_max, worst);
        if (worst > rep.max_b_over_H) {
            rep.max_b_over_H = worst;
            rep.witness_bounded = witness;
        }
    }
    rep.annuli_spread = annulus_min > 0 ? annulus_max / annulus_min : 1e300;
    // a ratio ~ H^(-1/2) lands exactly on the 1e3 boundary; classify it as divergent
    rep.bounded_ok = std::isfinite(rep.annuli_spread) && rep.annuli_spread < 1e3 * (1 - 1e-6);
    return rep;
}

RobustWeights build_robust_weights(const Scene& scene, const Expr& bbar, double eps0,
                                   int sample_budget) {
    if (eps0 <= 0) throw FieldError("robust weights require eps0 > 0");
    DiagnosticsReport diag = check_assumptions(scene);
    if (!diag.all_pass())
        throw FieldError("robust weights require a scene passing the assumption checks");

    // sampled supremum of |det(gradH, T, r-lift)| / |det(T, phi-lift, r-lift)|
    // (the wedge against beta^dbeta cancels the common lambda_beta factor)
    TubeSampler sampler(scene, scene.numerics.rng_seed + 2);
    const int annuli = 12;
    std::vector<double> per_annulus(annuli, 0.0);
    int per = std::max(16, sample_budget / annuli);
    for (int k = 1; k <= annuli; ++k) {
        double Hk = scene.delta2() / std::pow(2.0, k);
        double worst = 0;
        for (int i = 0; i < per; ++i) {
            Vec3 p = sampler.next_at(Hk);
            double f = scene.loop.f.eval(p);
            double g = scene.loop.g.eval(p);
            Vec3 gH = grad_H(scene.loop, p);
            Vec3 T;
            try {
                T = fiber_direction(scene, p);
            } catch (const RankDeficient&) {
                continue;
            }
            Vec3 dr = horizontal_velocity(scene, p, f, g);
            Vec3 dphi = horizontal_velocity(scene, p, -g, f);
            double denom = std::abs(triple(T, dphi, dr));
            if (denom < 1e-300) continue;
            double ratio = std::abs(triple(gH, T, dr)) / denom;
            worst = std::max(worst, ratio);
        }
        per_annulus[static_cast<size_t>(k - 1)] = worst;
    }
    double S = *std::max_element(per_annulus.begin(), per_annulus.end());
    // instability: the three smallest-H annuli disagreeing by more than 10x
    double t_min = 1e300, t_max = 0;
    for (int k = annuli - 3; k < annuli; ++k) {
        t_min = std::min(t_min, per_annulus[static_cast<size_t>(k)]);
        t_max = std::max(t_max, per_annulus[static_cast<size_t>(k)]);
    }
    if (t_min > 0 && t_max / t_min > 10.0)
        throw SupremumUnstable("annulus estimates of the weight-ratio supremum diverge");

    RobustWeights rw;
    rw.S = S;
    rw.eps0 = eps0;
    rw.b = bbar;
    const Scene* sc = &scene;
    Expr b = bbar;
    double Sv = S, e0 = eps0;
    rw.a = [sc, b, Sv, e0](const Vec3& p) {
        double lam = sc->constraint.lambda(p);
        double sgn = lam >= 0 ? 1.0 : -1.0;
        return sgn * ((std::abs(b.eval(p)) / std::abs(lam)) * Sv + e0);
    };

    GuidingField probe(scene, rw.a, [b](const Vec3& p) { return b.eval(p); }, "robust-probe");
    rw.report = probe.check_weights(std::max(200, sample_budget / 4));
    return rw;
}

} // namespace nonholo
