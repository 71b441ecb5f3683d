#include "nonholo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nonholo/connection.hpp"
#include "nonholo/errors.hpp"

namespace nonholo {

using nlohmann::json;

bool VerificationReport::all_pass() const {
    for (const auto& c : checks)
        if (c.applicable && !c.pass) return false;
    return true;
}

json VerificationReport::to_json() const {
    json arr = json::array();
    for (const auto& c : checks) {
        arr.push_back({{"check", c.check},
                       {"anchor", c.anchor},
                       {"pass", c.pass},
                       {"applicable", c.applicable},
                       {"measured", c.measured},
                       {"tolerance", c.tolerance},
                       {"witness", c.witness}});
    }
    return json{{"meta", meta}, {"checks", arr}};
}

VerificationReport VerificationReport::from_json(const json& j) {
    VerificationReport r;
    r.meta = j.at("meta");
    for (const auto& c : j.at("checks")) {
        CheckResult cr;
        cr.check = c.at("check");
        cr.anchor = c.at("anchor");
        cr.pass = c.at("pass");
        cr.applicable = c.at("applicable");
        cr.measured = c.at("measured");
        cr.tolerance = c.at("tolerance");
        cr.witness = c.at("witness");
        r.checks.push_back(cr);
    }
    return r;
}

int rho_sign(const Scene& scene) {
    const Vec3& p = scene.path.nodes.front();
    double lam = scene.constraint.lambda(p);
    return (lam >= 0 ? 1 : -1) * scene.loop.orientation_sign;
}

std::pair<double, double> fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    size_t n = std::min(x.size(), y.size());
    if (n < 2) return {0, 0};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) return {0, 0};
    double a = (n * sxy - sx * sy) / denom;
    double b = (sy - a * sx) / n;
    double ss_res = 0, ss_tot = 0, ybar = sy / n;
    for (size_t i = 0; i < n; ++i) {
        double e = y[i] - (a * x[i] + b);
        ss_res += e * e;
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return {a, r2};
}

CheckResult verify_convergence(const Trajectory& traj, double eps_conv) {
    CheckResult r;
    r.check = "convergence";
    r.anchor = "distance-to-path-decreasing";
    bool decreasing = true;
    double worst_increase = 0;
    for (size_t i = 1; i < traj.samples.size(); ++i) {
        double d = traj.samples[i].H - traj.samples[i - 1].H;
        if (d > 1e-12) {
            decreasing = false;
            worst_increase = std::max(worst_increase, d);
        }
    }
    double final_H = traj.samples.back().H;
    if (traj.samples.size() == 1 && final_H == 0) {
        // started on the path; vacuous pass
        r.pass = true;
        r.measured = {{"final_H", 0.0}, {"vacuous", true}};
        r.tolerance = {{"eps_conv", eps_conv}};
        return r;
    }
    r.measured = {{"final_H", final_H},
                  {"strictly_decreasing", decreasing},
                  {"worst_increase", worst_increase},
                  {"termination", termination_name(traj.termination)}};
    r.tolerance = {{"eps_conv", eps_conv}, {"decrease_slack", 1e-12}};
    r.pass = decreasing && final_H < eps_conv;
    return r;
}

CheckResult verify_circling(const Trajectory& traj, const PathPolyline& path) {
    (void)path;
    CheckResult r;
    r.check = "circling";
    r.anchor = "projected-angle-monotone-unbounded";

    std::vector<double> s_theta, theta, lnH;
    double H0 = traj.samples.front().H;
    for (const auto& s : traj.samples) {
        if (!std::isnan(s.theta_hat) && s.H > 0) {
            s_theta.push_back(s.s);
            theta.push_back(s.theta_hat);
            lnH.push_back(std::log(H0 / s.H));
        }
    }
    if (theta.size() < 8) throw InsufficientSamples("circling needs at least 8 theta samples");

    size_t skip = std::max<size_t>(1, theta.size() / 20); // first 5% = transient
    bool nondecreasing = true;
    double worst_drop = 0;
    for (size_t i = skip + 1; i < theta.size(); ++i) {
        double d = theta[i] - theta[i - 1];
        if (d < -1e-9) {
            nondecreasing = false;
            worst_drop = std::min(worst_drop, d);
        }
    }
    double total = theta.back() - theta.front();
    std::vector<double> xs(lnH.begin() + static_cast<long>(skip), lnH.end());
    std::vector<double> ys(theta.begin() + static_cast<long>(skip), theta.end());
    for (auto& v : ys) v -= ys.front();
    auto [slope, r2] = fit_slope(xs, ys);

    r.measured = {{"total_delta_theta", total},
                  {"nondecreasing_after_transient", nondecreasing},
                  {"worst_drop", worst_drop},
                  {"slope_vs_lnH", slope},
                  {"r_squared", r2},
                  {"theta_samples", theta.size()}};
    r.tolerance = {{"min_total", 4.0 * M_PI}, {"min_slope", 0.0}, {"min_r2", 0.5}};
    r.pass = nondecreasing && total >= 4.0 * M_PI && slope > 0 && r2 > 0.5;
    return r;
}

CheckResult verify_helix(const Scene& scene, const GuidingField& gf,
                         const std::vector<double>& start_H) {
    CheckResult r;
    r.check = "helix";
    r.anchor = "winding-holonomy-positive";
    int want = -rho_sign(scene); // the orientation the winding analysis prescribes

    TubeSampler sampler(scene, scene.numerics.rng_seed + 3);
    IntegratorConfig cfg;
    cfg.abs_tol = scene.numerics.abs_tol;
    cfg.rel_tol = scene.numerics.rel_tol;
    cfg.max_time = 1e4;
    cfg.theta_cadence = 5;

    json measured = json::array();
    bool sign_ok = true, monotone = true;
    double prev = 0;
    for (double H0 : start_H) {
        Vec3 p = sampler.next_at(H0);
        WindingPeriod wp = winding_flow_period(scene, gf, p, cfg);
        double signed_drift = wp.delta_theta_hat * want;
        measured.push_back({{"H", H0},
                            {"delta_theta_hat", wp.delta_theta_hat},
                            {"H_drift", wp.H_drift},
                            {"raw_base_direction", wp.raw_base_direction}});
        if (signed_drift <= 0) sign_ok = false;
        if (signed_drift <= prev) monotone = false;
        prev = signed_drift;
    }
    r.measured = {{"per_start", measured}, {"expected_sign", want}};
    r.tolerance = {{"sign", "delta_theta * expected_sign > 0"}, {"monotone_in_H", true}};
    r.pass = sign_ok && monotone;
    return r;
}

namespace {

// Point with prescribed (f, g) and fiber angle: Newton on three equations.
Vec3 point_on_disk(const Scene& scene, const Expr& angle, double theta_bar, double ft, double gt,
                   const Vec3& guess) {
    Vec3 p = guess;
    for (int it = 0; it < 60; ++it) {
        auto [fv, gfv] = scene.loop.f.eval_grad(p);
        auto [gv, ggv] = scene.loop.g.eval_grad(p);
        auto [av, gav] = angle.eval_grad(p);
        double ra = std::remainder(av - theta_bar, 2.0 * M_PI);
        Vec3 res{fv - ft, gv - gt, ra};
        if (std::max({std::abs(res.x1), std::abs(res.x2), std::abs(res.x3)}) < 1e-11) return p;
        HorizontalSolve hs;
        hs.rows = {gfv, ggv, gav};
        hs.det = triple(gfv, ggv, gav);
        p -= hs.solve(res);
    }
    throw NoConvergence("disk point construction failed");
}

} // namespace

CheckResult verify_obstruction(const Scene& scene, const GuidingField& gf, int disks, int grid) {
    CheckResult r;
    r.check = "obstruction";
    r.anchor = "disk-sign-change";

    Expr angle = scene.fiber_angle;
    bool via_theta = angle.empty();

    auto fiber_angle_of = [&](const Vec3& p) -> double {
        if (!via_theta) return angle.eval(p);
        return theta_on_path(scene.path, parallel_project(scene, p));
    };

    int rings = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(grid) / 8.0)));
    int spokes = std::max(4, grid / rings);
    double hole = 0.15;          // inner radius fraction of the (f,g) disk
    double rmax = 0.9 * scene.loop.tube_radius;

    bool all_pass = true;
    json per_disk = json::array();
    for (int d = 0; d < disks; ++d) {
        double theta_bar = 2.0 * M_PI * d / disks;
        // walk the disk: grid over the (f,g) annulus at this fiber angle
        size_t anchor_idx = static_cast<size_t>(
            std::llround(theta_bar / (2.0 * M_PI) * static_cast<double>(scene.path.nodes.size())));
        anchor_idx %= scene.path.nodes.size();
        Vec3 guess = scene.path.nodes[anchor_idx];

        int pos = 0, neg = 0, zero = 0;
        bool dH_definite = true;
        int dH_sign = 0;
        for (int i = 1; i <= rings; ++i) {
            double rad = rmax * (hole + (1.0 - hole) * i / rings);
            for (int s = 0; s < spokes; ++s) {
                double a = 2.0 * M_PI * s / spokes;
                Vec3 p;
                try {
                    if (via_theta) {
                        // fall back: grid points above the anchor node's fiber
                        p = find_on_level(scene.loop, guess, rad * std::cos(a),
                                          rad * std::sin(a));
                    } else {
                        p = point_on_disk(scene, angle, theta_bar, rad * std::cos(a),
                                          rad * std::sin(a), guess);
                    }
                } catch (const Error&) {
                    continue;
                }
                double dH = gf.dH_along(p);
                int s_dH = dH > 0 ? 1 : (dH < 0 ? -1 : 0);
                if (dH_sign == 0) dH_sign = s_dH;
                else if (s_dH != 0 && s_dH != dH_sign) dH_definite = false;

                // fiber-angle derivative along X by a short flow step
                Vec3 X = gf.eval_field(p);
                double nX = norm(X);
                if (nX == 0) continue;
                double hstep = 1e-6 / nX;
                Vec3 q = p + hstep * X; // first-order probe is enough for a sign
                double a0 = fiber_angle_of(p);
                double a1 = unwrap_angle(a0, fiber_angle_of(q));
                double dth = (a1 - a0) / hstep;
                double scale = std::abs(a0) + nX + 1.0;
                if (dth > 1e-6 * scale) ++pos;
                else if (dth < -1e-6 * scale) ++neg;
                else ++zero;
            }
        }
        bool applicable = dH_definite && dH_sign != 0;
        bool disk_pass = !applicable || (pos > 0 && neg > 0) || zero > 0;
        if (applicable && !disk_pass) {
            all_pass = false;
            if (r.witness.empty())
                r.witness = "InsufficientResolution: no sign change found; shrink the grid "
                            "hole or refine the grid";
        }
        per_disk.push_back({{"theta_bar", theta_bar},
                            {"dH_sign_definite", dH_definite},
                            {"dtheta_pos", pos},
                            {"dtheta_neg", neg},
                            {"dtheta_near_zero", zero}});
        if (!applicable) {
            r.applicable = false; // proposition precondition not met on this disk
        }
    }
    r.measured = {{"per_disk", per_disk}, {"fiber_angle_source", via_theta ? "theta" : "chart"}};
    r.tolerance = {{"near_zero", "1e-6 * scale"}};
    r.pass = all_pass;
    return r;
}

namespace {

struct Rng {
    std::uint64_t s;
    double u01() {
        std::uint64_t x = s;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        s = x;
        return static_cast<double>((x * 0x2545F4914F6CDD1Dull) >> 11) * 0x1.0p-53;
    }
    double uniform(double a, double b) { return a + (b - a) * u01(); }
    Vec3 vec(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
};

} // namespace

CheckResult verify_duality(std::uint64_t seed, int trials) {
    CheckResult r;
    r.check = "duality";
    r.anchor = "wedge-cross-correspondence";
    Rng rng{seed ? seed : 1};

    double worst_duality = 0, worst_tangency = 0, worst_roundtrip = 0;
    std::string witness;
    for (int k = 0; k < trials; ++k) {
        Vec3 a = rng.vec(-2, 2), t1 = rng.vec(-2, 2), t2 = rng.vec(-2, 2);
        double scale = norm(a) * norm(t1) * norm(t2) + 1e-300;
        double resid = std::abs(duality_residual(a, t1, t2)) / scale;
        if (resid > worst_duality) worst_duality = resid;

        // tangency: beta(dual_of_wedge(beta, tau)) = 0
        double tang = std::abs(dot(t1, cross(t1, t2))) / (norm2(t1) * norm(t2) + 1e-300);
        worst_tangency = std::max(worst_tangency, tang);

        // factorization roundtrip for a tangent X
        Vec3 vb = rng.vec(-2, 2);
        if (norm(vb) < 1e-3) continue;
        Vec3 X = cross(vb, rng.vec(-2, 2));
        if (norm(X) < 1e-9) continue;
        Vec3 vtau = factor_tau_at(vb, X, 1e-9);
        double rt = norm(cross(vb, vtau) - X) / (norm(X) + 1e-300);
        if (rt > worst_roundtrip) {
            worst_roundtrip = rt;
            std::ostringstream os;
            os << "vb=(" << vb.x1 << "," << vb.x2 << "," << vb.x3 << ")";
            witness = os.str();
        }
    }
    r.measured = {{"trials", trials},
                  {"worst_duality_residual", worst_duality},
                  {"worst_tangency", worst_tangency},
                  {"worst_roundtrip", worst_roundtrip}};
    r.tolerance = {{"relative", 1e-10}};
    r.witness = witness;
    r.pass = trials == 0 ||
             (worst_duality < 1e-10 && worst_tangency < 1e-10 && worst_roundtrip < 1e-10);
    if (trials == 0) r.witness = "vacuous: zero trials";
    return r;
}

CheckResult verify_tangency(const Scene& scene, const GuidingField& gf, int samples,
                            std::uint64_t seed) {
    CheckResult r;
    r.check = "tangency";
    r.anchor = "constraint-tangency";
    TubeSampler sampler(scene, seed);
    double worst = 0;
    Vec3 witness{};
    for (int k = 0; k < samples; ++k) {
        Vec3 p = sampler.next();
        Vec3 X = gf.eval_field(p);
        Vec3 vb = scene.constraint.vbeta(p);
        double denom = norm(vb) * norm(X) + 1e-300;
        double resid = std::abs(dot(vb, X)) / denom;
        if (resid > worst) {
            worst = resid;
            witness = p;
        }
    }
    r.measured = {{"samples", samples}, {"worst_residual", worst}};
    r.tolerance = {{"normalized", 1e-9}};
    std::ostringstream os;
    os << "(" << witness.x1 << "," << witness.x2 << "," << witness.x3 << ")";
    r.witness = os.str();
    r.pass = worst < 1e-9;
    return r;
}

CheckResult verify_projection(const Scene& scene) {
    CheckResult r;
    r.check = "projection";
    r.anchor = "parallel-projection-consistency";
    TubeSampler sampler(scene, scene.numerics.rng_seed + 4);

    double worst_idem = 0, worst_roundtrip = 0;
    for (int k = 0; k < 12; ++k) {
        Vec3 p = sampler.next();
        Vec3 q = parallel_project(scene, p);
        Vec3 q2 = parallel_project(scene, q);
        worst_idem = std::max(worst_idem, norm(q2 - q));
    }
    for (int k = 0; k < 6; ++k) {
        Vec3 q0 = scene.path.nodes[(k * 97) % scene.path.nodes.size()];
        double ang = sampler.uniform(0, 2 * M_PI);
        double rad = 0.6 * scene.loop.tube_radius;
        double z1 = rad * std::cos(ang), z2 = rad * std::sin(ang);
        for (double t : {0.25, 0.5, 1.0}) {
            Vec3 up = psi(scene, q0, z1, z2, t);
            Vec3 back = parallel_project(scene, up);
            worst_roundtrip = std::max(worst_roundtrip, norm(back - q0));
        }
    }
    r.measured = {{"worst_idempotence", worst_idem}, {"worst_psi_roundtrip", worst_roundtrip}};
    r.tolerance = {{"idempotence", 2e-8}, {"roundtrip", 1e-7}};
    r.pass = worst_idem < 2e-8 && worst_roundtrip < 1e-7;
    return r;
}

VerificationReport run_suite(const Scene& scene, const GuidingField& gf,
                             const VerifyConfig& cfg) {
    VerificationReport rep;
    rep.meta = {{"seed", cfg.rng_seed},
                {"weights", gf.describe()},
                {"theta_note", "angles are measured through the parallel projection; rates "
                               "agree with chart angles only up to bounded distortion"}};

    DiagnosticsReport diag = check_assumptions(scene);
    bool assumptions_ok = diag.all_pass();
    for (const auto& c : diag.checks) {
        CheckResult cr;
        cr.check = "assumption-" + c.name;
        cr.anchor = c.name;
        cr.pass = c.pass;
        cr.measured = {{"value", c.measured}, {"note", c.note}};
        cr.tolerance = {{"threshold", c.tolerance}};
        std::ostringstream os;
        os << "(" << c.witness.x1 << "," << c.witness.x2 << "," << c.witness.x3 << ")";
        cr.witness = os.str();
        rep.checks.push_back(cr);
    }

    {
        WeightReport wr = gf.check_weights(scene.numerics.sample_budget / 2);
        CheckResult cr;
        cr.check = "weights";
        cr.anchor = "weight-conditions";
        cr.applicable = assumptions_ok;
        cr.pass = wr.all_pass();
        cr.measured = {{"min_a_lambda", wr.min_a_lambda},
                       {"min_b_off_path", wr.min_b},
                       {"max_b_over_H", wr.max_b_over_H},
                       {"annuli_spread", wr.annuli_spread}};
        cr.tolerance = {{"sign", "> 0"}, {"spread", 1e3}};
        rep.checks.push_back(cr);
    }

    rep.checks.push_back(verify_duality(cfg.rng_seed, cfg.duality_trials));

    if (!assumptions_ok) {
        // downstream dynamical checks are not meaningful; emit them as skipped
        for (const char* name : {"tangency", "convergence", "circling", "helix", "obstruction",
                                 "projection"}) {
            CheckResult cr;
            cr.check = name;
            cr.anchor = name;
            cr.applicable = false;
            cr.witness = "skipped: assumption checks failed";
            rep.checks.push_back(cr);
        }
        return rep;
    }

    rep.checks.push_back(verify_tangency(scene, gf, cfg.tangency_samples, cfg.rng_seed + 5));

    {
        IntegratorConfig icfg;
        icfg.abs_tol = scene.numerics.abs_tol;
        icfg.rel_tol = scene.numerics.rel_tol;
        icfg.max_time = scene.numerics.max_time;
        icfg.theta_cadence = scene.numerics.theta_cadence;
        TubeSampler sampler(scene, cfg.rng_seed + 6);
        bool conv_all = true, circ_all = true;
        json conv_meas = json::array(), circ_meas = json::array();
        for (int i = 0; i < cfg.convergence_starts; ++i) {
            Vec3 p = sampler.next_at(sampler.uniform(0.01, std::min(0.2, 0.8 * scene.delta2())));
            Trajectory tr = simulate_one(scene, gf, p, icfg);
            CheckResult c1 = verify_convergence(tr, scene.numerics.eps_conv);
            conv_all = conv_all && c1.pass;
            conv_meas.push_back(c1.measured);
            try {
                CheckResult c2 = verify_circling(tr, scene.path);
                circ_all = circ_all && c2.pass;
                circ_meas.push_back(c2.measured);
            } catch (const InsufficientSamples& e) {
                circ_all = false;
                circ_meas.push_back({{"error", e.what()}});
            }
        }
        CheckResult conv;
        conv.check = "convergence";
        conv.anchor = "distance-to-path-decreasing";
        conv.pass = conv_all;
        conv.measured = {{"per_start", conv_meas}};
        conv.tolerance = {{"eps_conv", scene.numerics.eps_conv}};
        rep.checks.push_back(conv);

        CheckResult circ;
        circ.check = "circling";
        circ.anchor = "projected-angle-monotone-unbounded";
        circ.pass = circ_all;
        circ.measured = {{"per_start", circ_meas}};
        circ.tolerance = {{"min_total", 4.0 * M_PI}, {"min_slope", 0.0}, {"min_r2", 0.5}};
        rep.checks.push_back(circ);
    }

    rep.checks.push_back(verify_helix(scene, gf, {0.0025, 0.01, 0.04}));
    rep.checks.push_back(verify_obstruction(scene, gf, cfg.obstruction_disks,
                                            cfg.obstruction_grid));
    rep.checks.push_back(verify_projection(scene));
    return rep;
}

} // namespace nonholo
