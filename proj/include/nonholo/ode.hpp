#ifndef NONHOLO_ODE_HPP
#define NONHOLO_ODE_HPP

#include <cmath>
#include <functional>

#include "nonholo/errors.hpp"
#include "nonholo/vec3.hpp"

namespace nonholo {

using OdeField = std::function<Vec3(double, const Vec3&)>;

// Classic fixed-step fourth-order step.
inline Vec3 rk4_step(const OdeField& f, double t, const Vec3& y, double h) {
    Vec3 k1 = f(t, y);
    Vec3 k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    Vec3 k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    Vec3 k4 = f(t + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct EmbeddedStep {
    Vec3 y5;      // fifth-order solution
    Vec3 err;     // y5 - y4
    Vec3 k_last;  // FSAL stage
};

// Dormand-Prince 5(4) pair.
inline EmbeddedStep dopri_step(const OdeField& f, double t, const Vec3& y, double h,
                               const Vec3* k1_in = nullptr) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640,
                            e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    Vec3 k1 = k1_in ? *k1_in : f(t, y);
    Vec3 k2 = f(t + h / 5.0, y + h * (a21 * k1));
    Vec3 k3 = f(t + 3.0 * h / 10, y + h * (a31 * k1 + a32 * k2));
    Vec3 k4 = f(t + 4.0 * h / 5, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Vec3 k5 = f(t + 8.0 * h / 9, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Vec3 k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vec3 y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vec3 k7 = f(t + h, y5);
    Vec3 err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return {y5, err, k7};
}

struct AdaptiveControl {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double h_min = 1e-14;
    double h_max = 1e300;
};

// Error measure used for acceptance: max over components of |e| / (atol + rtol |y|).
inline double error_ratio(const Vec3& err, const Vec3& y0, const Vec3& y1,
                          const AdaptiveControl& c) {
    double r = 0;
    for (int i = 0; i < 3; ++i) {
        double sc = c.abs_tol + c.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        r = std::max(r, std::abs(err[i]) / sc);
    }
    return r;
}

// One accepted adaptive step; h is updated in place (suggestion for the next
// step).  `veto` may reject an otherwise accepted state (forces h /= 2).
// Throws StepCollapse when h falls below h_min.
inline void adaptive_step(const OdeField& f, double& t, Vec3& y, double& h,
                          const AdaptiveControl& ctrl,
                          const std::function<bool(const Vec3&, const Vec3&)>& veto = {}) {
    for (int tries = 0; tries < 200; ++tries) {
        if (std::abs(h) < ctrl.h_min) throw StepCollapse("adaptive step below minimum");
        EmbeddedStep s = dopri_step(f, t, y, h);
        double r = error_ratio(s.err, y, s.y5, ctrl);
        if (r <= 1.0) {
            if (veto && !veto(y, s.y5)) {
                h *= 0.5;
                continue;
            }
            t += h;
            y = s.y5;
            double grow = (r > 0) ? 0.9 * std::pow(r, -0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
            h = std::copysign(std::min(std::abs(h), ctrl.h_max), h);
            return;
        }
        h *= std::clamp(0.9 * std::pow(r, -0.2), 0.1, 0.9);
    }
    throw StepCollapse("step size control failed to accept a step");
}

} // namespace nonholo

#endif
