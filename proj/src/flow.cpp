#include "nonholo/flow.hpp"

#include <algorithm>
#include <cmath>

#include "nonholo/connection.hpp"
#include "nonholo/errors.hpp"

namespace nonholo {

std::string termination_name(Termination t) {
    switch (t) {
        case Termination::Converged: return "Converged";
        case Termination::TubeExit: return "TubeExit";
        case Termination::Budget: return "Budget";
        case Termination::Event: return "Event";
        case Termination::Singular: return "Singular";
    }
    return "?";
}

namespace {

bool direction_matches(double prev, double curr, int dir) {
    if (dir > 0) return prev < 0 && curr >= 0;
    if (dir < 0) return prev > 0 && curr <= 0;
    return (prev < 0 && curr >= 0) || (prev > 0 && curr <= 0);
}

// Bisection between two states connected by short re-integration; localizes an
// event time to 1e-9.
std::pair<double, Vec3> localize_event(const OdeField& rhs, double t0, const Vec3& y0, double t1,
                                       const std::function<double(const Vec3&)>& fn) {
    double lo = t0, hi = t1;
    Vec3 ylo = y0;
    double flo_sign = fn(y0) >= 0 ? 1.0 : -1.0;
    while (hi - lo > 1e-9) {
        double mid = 0.5 * (lo + hi);
        int sub = std::max(1, static_cast<int>(std::ceil((mid - lo) / 1e-3)));
        double dt = (mid - lo) / sub;
        Vec3 ym = ylo;
        double tm = lo;
        for (int i = 0; i < sub; ++i) {
            ym = rk4_step(rhs, tm, ym, dt);
            tm += dt;
        }
        if ((fn(ym) >= 0 ? 1.0 : -1.0) == flo_sign) {
            lo = mid;
            ylo = ym;
        } else {
            hi = mid;
        }
    }
    int sub = 10;
    double target = 0.5 * (lo + hi);
    double dt = (target - lo) / sub;
    Vec3 ye = ylo;
    double te = lo;
    for (int i = 0; i < sub; ++i) {
        ye = rk4_step(rhs, te, ye, dt);
        te += dt;
    }
    return {target, ye};
}

} // namespace

Trajectory integrate(const FieldFn& field, const Vec3& start, const IntegratorConfig& cfg,
                     const EventSpec& events) {
    Trajectory traj;
    OdeField rhs = [&](double, const Vec3& y) {
        Vec3 v = field(y);
        if (!finite(v)) throw FieldError("field produced a non-finite value");
        return v;
    };

    double t = 0;
    Vec3 y = start;
    traj.samples.push_back({t, y, 0, std::numeric_limits<double>::quiet_NaN(), 0, 0});

    std::vector<double> ev_prev(events.events.size());
    for (size_t i = 0; i < events.events.size(); ++i) ev_prev[i] = events.events[i].value(y);
    // events already active at the start fire immediately
    for (size_t i = 0; i < events.events.size(); ++i) {
        const auto& ev = events.events[i];
        if (ev.terminal && ((ev.direction >= 0 && ev_prev[i] == 0) ||
                            (ev.direction > 0 && ev_prev[i] > 0) ||
                            (ev.direction < 0 && ev_prev[i] < 0))) {
            traj.termination = Termination::Event;
            traj.event_name = ev.name;
            return traj;
        }
    }

    // stationary start: zero field
    if (norm(field(y)) == 0.0) {
        traj.termination = Termination::Converged;
        return traj;
    }

    AdaptiveControl ctrl{cfg.abs_tol, cfg.rel_tol, 1e-14, cfg.max_step};
    double h = cfg.method == IntegratorConfig::Method::Rk4Fixed ? cfg.step
                                                                : std::min(cfg.max_step, 1e-3);
    int steps = 0;
    while (t < cfg.max_time && steps < cfg.max_steps) {
        double t_prev = t;
        Vec3 y_prev = y;
        if (cfg.method == IntegratorConfig::Method::Rk4Fixed) {
            double hh = std::min(h, cfg.max_time - t);
            y = rk4_step(rhs, t, y, hh);
            t += hh;
        } else {
            if (t + h > cfg.max_time) h = cfg.max_time - t;
            adaptive_step(rhs, t, y, h, ctrl);
        }
        ++steps;
        traj.samples.push_back({t, y, 0, std::numeric_limits<double>::quiet_NaN(), 0, 0});

        for (size_t i = 0; i < events.events.size(); ++i) {
            const auto& ev = events.events[i];
            double curr = ev.value(y);
            if (direction_matches(ev_prev[i], curr, ev.direction)) {
                auto [te, ye] = localize_event(rhs, t_prev, y_prev, t, ev.value);
                traj.samples.back() = {te, ye, 0, std::numeric_limits<double>::quiet_NaN(), 0, 0};
                if (ev.terminal) {
                    traj.termination = Termination::Event;
                    traj.event_name = ev.name;
                    return traj;
                }
            }
            ev_prev[i] = curr;
        }
    }
    traj.termination = Termination::Budget;
    return traj;
}

namespace {

struct GvfRunState {
    const Scene& scene;
    const GuidingField& gf;

    double beta_residual(const Vec3& p, const Vec3& X) const {
        Vec3 vb = scene.constraint.vbeta(p);
        double denom = norm(vb) * norm(X) + 1e-300;
        return std::abs(dot(vb, X)) / denom;
    }

    double base_angle(const Vec3& p) const {
        double f = scene.loop.f.eval(p);
        double g = scene.loop.g.eval(p);
        return std::atan2(g, f);
    }
};

} // namespace

Trajectory simulate_one(const Scene& scene, const GuidingField& gf, const Vec3& start,
                        const IntegratorConfig& cfg) {
    Trajectory traj;
    GvfRunState st{scene, gf};
    OdeField rhs = [&](double, const Vec3& y) { return gf.eval_field(y); };

    double eps_conv = scene.numerics.eps_conv;
    double tube_limit = scene.delta2();

    double t = 0;
    Vec3 y = start;
    double H0 = lyapunov_H(scene.loop, y);

    double phi = st.base_angle(y);
    double theta = std::numeric_limits<double>::quiet_NaN();
    auto theta_at = [&](const Vec3& p) {
        Vec3 q = parallel_project(scene, p);
        return theta_on_path(scene.path, q);
    };

    auto push = [&](double tt, const Vec3& yy, bool with_theta) {
        Sample s;
        s.s = tt;
        s.p = yy;
        s.H = lyapunov_H(scene.loop, yy);
        double w = st.base_angle(yy);
        phi = unwrap_angle(phi, w);
        s.phi_base = phi;
        Vec3 X = gf.eval_field(yy);
        s.beta_residual = st.beta_residual(yy, X);
        if (with_theta) {
            double th = theta_at(yy);
            theta = std::isnan(theta) ? th : unwrap_angle(theta, th);
            s.theta_hat = theta;
        }
        traj.samples.push_back(s);
    };

    push(0, y, cfg.theta_cadence > 0);

    if (H0 < eps_conv || norm(gf.eval_field(y)) == 0.0) {
        traj.termination = Termination::Converged;
        return traj;
    }

    AdaptiveControl ctrl{cfg.abs_tol, cfg.rel_tol, 1e-14, cfg.max_step};
    // keep per-step base-angle change below pi/4 so unwrapping is unambiguous
    auto veto = [&](const Vec3& a, const Vec3& b) {
        double da = std::remainder(st.base_angle(b) - st.base_angle(a), 2.0 * M_PI);
        return std::abs(da) < M_PI / 4.0;
    };

    double h = std::min(cfg.max_step, 1e-3);
    int steps = 0;
    try {
        while (t < cfg.max_time && steps < cfg.max_steps) {
            double t_prev = t;
            Vec3 y_prev = y;
            if (cfg.method == IntegratorConfig::Method::Rk4Fixed) {
                double hh = std::min(cfg.step, cfg.max_time - t);
                Vec3 y_new = rk4_step(rhs, t, y, hh);
                if (!veto(y, y_new)) throw StepCollapse("fixed step too large for unwrapping");
                y = y_new;
                t += hh;
            } else {
                if (t + h > cfg.max_time) h = cfg.max_time - t;
                adaptive_step(rhs, t, y, h, ctrl, veto);
            }
            ++steps;
            double H = lyapunov_H(scene.loop, y);

            if (H < eps_conv) {
                auto [te, ye] = localize_event(
                    rhs, t_prev, y_prev, t,
                    [&](const Vec3& p) { return lyapunov_H(scene.loop, p) - eps_conv; });
                push(te, ye, cfg.theta_cadence > 0);
                traj.termination = Termination::Converged;
                return traj;
            }
            if (H > tube_limit * (1.0 + 1e-9)) {
                push(t, y, cfg.theta_cadence > 0);
                traj.termination = Termination::TubeExit;
                return traj;
            }
            push(t, y, cfg.theta_cadence > 0 && steps % cfg.theta_cadence == 0);
        }
    } catch (const StepCollapse&) {
        traj.termination = Termination::Singular;
        return traj;
    }
    if (cfg.theta_cadence > 0 && std::isnan(traj.samples.back().theta_hat)) {
        Sample s = traj.samples.back();
        double th = theta_at(s.p);
        theta = std::isnan(theta) ? th : unwrap_angle(theta, th);
        s.theta_hat = theta;
        traj.samples.back() = s;
    }
    traj.termination = Termination::Budget;
    return traj;
}

std::vector<Trajectory> simulate_gvf(const Scene& scene, const GuidingField& gf,
                                     const std::vector<Vec3>& starts,
                                     const IntegratorConfig& cfg) {
    std::vector<Trajectory> out;
    out.reserve(starts.size());
    for (const Vec3& s : starts) out.push_back(simulate_one(scene, gf, s, cfg));
    return out;
}

WindingPeriod winding_flow_period(const Scene& scene, const GuidingField& gf, const Vec3& start,
                                  const IntegratorConfig& cfg) {
    WindingPeriod wp;
    double H0 = lyapunov_H(scene.loop, start);
    if (H0 <= 0) throw FieldError("winding period needs a start off the path");

    Vec3 w0 = gf.winding_component(start);
    double raw = gf.dphi_of(start, w0);
    if (std::abs(raw) < 1e-12) throw NoReturn("winding component does not advance the base angle");
    wp.raw_base_direction = raw > 0 ? +1 : -1;

    // traverse the orbit with the base angle advancing
    double sigma = raw > 0 ? 1.0 : -1.0;
    OdeField rhs = [&](double, const Vec3& y) { return sigma * gf.winding_component(y); };

    GvfRunState st{scene, gf};
    double phi0 = st.base_angle(start);
    double phi = phi0;

    auto theta_at = [&](const Vec3& p) {
        Vec3 q = parallel_project(scene, p);
        return theta_on_path(scene.path, q);
    };
    double theta0 = theta_at(start);
    double theta = theta0;

    AdaptiveControl ctrl{cfg.abs_tol, cfg.rel_tol, 1e-14, cfg.max_step};
    auto veto = [&](const Vec3& a, const Vec3& b) {
        double da = std::remainder(st.base_angle(b) - st.base_angle(a), 2.0 * M_PI);
        return std::abs(da) < M_PI / 4.0;
    };

    double t = 0;
    Vec3 y = start;
    double h = std::min(cfg.max_step, 1e-3);
    int steps = 0;
    int cadence = std::max(1, cfg.theta_cadence);
    wp.trajectory.samples.push_back(
        {0, y, H0, theta0, phi0, st.beta_residual(y, rhs(0, y))});
    while (steps < cfg.max_steps && t < cfg.max_time) {
        double t_prev = t;
        Vec3 y_prev = y;
        double phi_prev = phi;
        adaptive_step(rhs, t, y, h, ctrl, veto);
        ++steps;
        phi = unwrap_angle(phi, st.base_angle(y));
        if (steps % cadence == 0) theta = unwrap_angle(theta, theta_at(y));
        wp.trajectory.samples.push_back(
            {t, y, lyapunov_H(scene.loop, y), theta, phi, st.beta_residual(y, rhs(t, y))});
        if (phi - phi0 >= 2.0 * M_PI) {
            // refine the revolution-complete time by bisection on phi advance
            auto fn = [&](const Vec3& p) {
                double w = st.base_angle(p);
                return unwrap_angle(phi_prev, w) - (phi0 + 2.0 * M_PI);
            };
            auto [te, ye] = localize_event(rhs, t_prev, y_prev, t, fn);
            theta = unwrap_angle(theta, theta_at(ye));
            wp.delta_theta_hat = theta - theta0;
            wp.H_drift = std::abs(lyapunov_H(scene.loop, ye) - H0);
            wp.trajectory.samples.back() = {te, ye, lyapunov_H(scene.loop, ye), theta,
                                            phi0 + 2.0 * M_PI, st.beta_residual(ye, rhs(te, ye))};
            wp.trajectory.termination = Termination::Event;
            wp.trajectory.event_name = "base-revolution";
            return wp;
        }
    }
    throw NoReturn("base angle did not advance by 2*pi within the budget");
}

} // namespace nonholo
