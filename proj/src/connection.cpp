#include "nonholo/connection.hpp"

#include <algorithm>
#include <cmath>

#include "nonholo/errors.hpp"
#include "nonholo/ode.hpp"

namespace nonholo {

HorizontalSolve HorizontalSolve::at(const Scene& scene, const Vec3& p) {
    auto [fv, gf] = scene.loop.f.eval_grad(p);
    auto [gv, gg] = scene.loop.g.eval_grad(p);
    (void)fv; (void)gv;
    Vec3 vb = scene.constraint.vbeta(p);
    HorizontalSolve hs;
    hs.rows = {gf, gg, vb};
    hs.det = triple(gf, gg, vb);
    double scale = norm(gf) * norm(gg) * norm(vb);
    hs.cond_estimate = scale > 0 ? scale / std::abs(hs.det) : 1e300;
    return hs;
}

Vec3 HorizontalSolve::solve(const Vec3& rhs) const {
    double scale = norm(rows[0]) * norm(rows[1]) * norm(rows[2]);
    if (std::abs(det) < 1e-12 * (scale + 1e-300))
        throw TransversalityLost("singular horizontal system, det = " + std::to_string(det));
    // Cramer on the row system A v = rhs with rows a0,a1,a2:
    // v = (rhs0 (a1 x a2) + rhs1 (a2 x a0) + rhs2 (a0 x a1)) / det
    return (rhs.x1 * cross(rows[1], rows[2]) + rhs.x2 * cross(rows[2], rows[0]) +
            rhs.x3 * cross(rows[0], rows[1])) /
           det;
}

Vec3 horizontal_velocity(const Scene& scene, const Vec3& p, double w1, double w2) {
    return HorizontalSolve::at(scene, p).solve({w1, w2, 0.0});
}

namespace {

// Lift driver with an exact base-derivative function.
Lift lift_with_derivative(const Scene& scene, const BaseCurve& base,
                          const std::function<std::array<double, 2>(double)>& dbase, double t0,
                          double t1, const Vec3& start, bool polish_end) {
    Lift lift;
    const double tube_limit = scene.delta2() * 1.02 + 1e-9;

    OdeField rhs = [&](double t, const Vec3& y) -> Vec3 {
        auto d = dbase(t);
        return horizontal_velocity(scene, y, d[0], d[1]);
    };

    AdaptiveControl ctrl;
    ctrl.abs_tol = scene.numerics.abs_tol;
    ctrl.rel_tol = scene.numerics.rel_tol;
    ctrl.h_max = std::abs(t1 - t0);

    double t = t0;
    Vec3 y = start;
    double h = (t1 - t0) * 0.05;
    if (h == 0) h = 1e-3;

    auto record = [&](double tt, const Vec3& yy) {
        auto w = base(tt);
        double f = scene.loop.f.eval(yy);
        double g = scene.loop.g.eval(yy);
        double base_err = std::hypot(f - w[0], g - w[1]);
        auto d = dbase(tt);
        Vec3 v = horizontal_velocity(scene, yy, d[0], d[1]);
        Vec3 vb = scene.constraint.vbeta(yy);
        double denom = norm(vb) * norm(v) + 1e-300;
        lift.points.push_back({tt, yy, base_err, std::abs(dot(vb, v)) / denom});
    };

    record(t, y);
    int guard = 0;
    while ((t1 > t0 && t < t1) || (t1 < t0 && t > t1)) {
        if (++guard > scene.numerics.max_steps) throw NoConvergence("lift exceeded step budget");
        if ((t1 > t0 && t + h > t1) || (t1 < t0 && t + h < t1)) h = t1 - t;
        adaptive_step(rhs, t, y, h, ctrl);
        if (lyapunov_H(scene.loop, y) > tube_limit)
            throw nonholo::TubeExit("lift left the tube");
        record(t, y);
    }

    if (polish_end) {
        auto w = base(t1);
        y = find_on_level(scene.loop, y, w[0], w[1], 5, 1e-12);
        lift.points.back().p = y;
        double f = scene.loop.f.eval(y);
        double g = scene.loop.g.eval(y);
        lift.points.back().base_err = std::hypot(f - w[0], g - w[1]);
    }
    lift.end = y;
    return lift;
}

} // namespace

Lift lift_path(const Scene& scene, const BaseCurve& base, double t0, double t1,
               const Vec3& start) {
    // precondition: start sits over base(t0)
    {
        auto w = base(t0);
        double f = scene.loop.f.eval(start);
        double g = scene.loop.g.eval(start);
        if (std::hypot(f - w[0], g - w[1]) > 1e-6)
            throw FieldError("lift start does not project to base(t0)");
    }
    double span = std::max(std::abs(t1 - t0), 1e-12);
    double dh = 1e-7 * span;
    auto dbase = [&, dh](double t) -> std::array<double, 2> {
        auto wp = base(t + dh);
        auto wm = base(t - dh);
        return {(wp[0] - wm[0]) / (2 * dh), (wp[1] - wm[1]) / (2 * dh)};
    };
    return lift_with_derivative(scene, base, dbase, t0, t1, start, true);
}

Vec3 parallel_project(const Scene& scene, const Vec3& p) {
    double f0 = scene.loop.f.eval(p);
    double g0 = scene.loop.g.eval(p);
    if (f0 * f0 + g0 * g0 < 1e-20) return find_on_path(scene.loop, p);

    BaseCurve base = [f0, g0](double t) -> std::array<double, 2> {
        return {(1 - t) * f0, (1 - t) * g0};
    };
    auto dbase = [f0, g0](double) -> std::array<double, 2> { return {-f0, -g0}; };
    Lift lift = lift_with_derivative(scene, base, dbase, 0.0, 1.0, p, true);
    return lift.end;
}

Vec3 psi(const Scene& scene, const Vec3& q, double z1, double z2, double t) {
    if (t == 0) return q;
    BaseCurve base = [z1, z2](double u) -> std::array<double, 2> { return {u * z1, u * z2}; };
    auto dbase = [z1, z2](double) -> std::array<double, 2> { return {z1, z2}; };
    Lift lift = lift_with_derivative(scene, base, dbase, 0.0, t, q, true);
    return lift.end;
}

FirstReturn first_return(const Scene& scene, const Vec3& anchor, double z1, double z2,
                         double max_time) {
    FirstReturn fr;
    Vec3 q;
    try {
        q = find_on_level(scene.loop, anchor, z1, z2, 60, 1e-12);
    } catch (const Error& e) {
        throw SectionDegenerate(std::string("section point construction failed: ") + e.what());
    }
    fr.section_point = q;

    Vec3 n;
    try {
        n = fiber_direction(scene, anchor);
    } catch (const RankDeficient& e) {
        throw SectionDegenerate(e.what());
    }
    n = n / norm(n);

    OdeField rhs = [&](double, const Vec3& y) -> Vec3 {
        Vec3 t = fiber_direction(scene, y);
        return t / (1.0 + norm2(t));
    };

    AdaptiveControl ctrl;
    ctrl.abs_tol = scene.numerics.abs_tol;
    ctrl.rel_tol = scene.numerics.rel_tol;
    ctrl.h_max = 0.25;

    auto sdist = [&](const Vec3& y) { return dot(n, y - anchor); };

    double t = 0;
    Vec3 y = q;
    double h = 1e-3;
    fr.trajectory.emplace_back(t, y);
    bool armed = false;
    double s_prev = sdist(y);
    Vec3 y_prev = y;
    double t_prev = 0;

    while (t < max_time) {
        adaptive_step(rhs, t, y, h, ctrl);
        double s = sdist(y);
        fr.trajectory.emplace_back(t, y);
        if (s < -1e-6) armed = true;
        if (armed && s_prev < 0 && s >= 0) {
            // bisection on the crossing time inside [t_prev, t]
            double lo = t_prev, hi = t;
            Vec3 ylo = y_prev;
            while (hi - lo > 1e-9) {
                double mid = 0.5 * (lo + hi);
                // integrate from (lo, ylo) to mid with small fixed steps
                Vec3 ym = ylo;
                double tm = lo;
                double hh = (mid - lo);
                int sub = std::max(1, static_cast<int>(std::ceil(hh / 1e-3)));
                double dt = hh / sub;
                for (int i = 0; i < sub; ++i) {
                    ym = rk4_step(rhs, tm, ym, dt);
                    tm += dt;
                }
                if (sdist(ym) < 0) {
                    lo = mid;
                    ylo = ym;
                } else {
                    hi = mid;
                }
            }
            fr.return_time = 0.5 * (lo + hi);
            // state at the refined time
            Vec3 yr = ylo;
            double tr = lo;
            int sub = 50;
            double dt = (fr.return_time - lo) / sub;
            for (int i = 0; i < sub; ++i) {
                yr = rk4_step(rhs, tr, yr, dt);
                tr += dt;
            }
            Vec3 dir = rhs(tr, yr);
            if (dot(n, dir) <= 0) throw SectionDegenerate("crossing with non-positive orientation");
            fr.return_point = yr;
            return fr;
        }
        s_prev = s;
        y_prev = y;
        t_prev = t;
    }
    throw NoReturn("no section crossing within the time budget");
}

ReturnChart build_return_chart(const Scene& scene, const Vec3& anchor, double disk_radius,
                               int rings, int spokes) {
    ReturnChart chart;
    chart.anchor = anchor;
    Vec3 n = fiber_direction(scene, anchor);
    chart.normal = n / norm(n);
    chart.disk_radius = disk_radius;
    chart.grid.push_back({0.0, 0.0, first_return(scene, anchor, 0, 0).return_time});
    for (int r = 1; r <= rings; ++r) {
        double rad = disk_radius * r / rings;
        for (int s = 0; s < spokes; ++s) {
            double a = 2.0 * M_PI * s / spokes;
            double z1 = rad * std::cos(a), z2 = rad * std::sin(a);
            chart.grid.push_back({z1, z2, first_return(scene, anchor, z1, z2).return_time});
        }
    }
    return chart;
}

} // namespace nonholo
