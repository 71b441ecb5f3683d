#ifndef NONHOLO_CONNECTION_HPP
#define NONHOLO_CONNECTION_HPP

#include <array>
#include <functional>
#include <vector>

#include "nonholo/scene.hpp"

namespace nonholo {

// 3x3 system rows (grad f, grad g, V_beta) at a point.  The determinant is
// beta(grad f x grad g); it vanishes exactly where transversality fails.
struct HorizontalSolve {
    std::array<Vec3, 3> rows;
    double det = 0;
    double cond_estimate = 0;

    static HorizontalSolve at(const Scene& scene, const Vec3& p);
    Vec3 solve(const Vec3& rhs) const; // throws TransversalityLost on singular rows
};

// Unique v with df(v) = w1, dg(v) = w2, beta(v) = 0.
Vec3 horizontal_velocity(const Scene& scene, const Vec3& p, double w1, double w2);

// Base curve t -> (w1, w2) in the (f, g) plane.
using BaseCurve = std::function<std::array<double, 2>(double)>;

struct LiftPoint {
    double t;
    Vec3 p;
    double base_err;   // |(f,g)(p) - base(t)|
    double beta_resid; // |beta(p')| at the accepted step, normalized
};

struct Lift {
    std::vector<LiftPoint> points;
    Vec3 end{};
};

// Horizontal lift of `base` over [t0, t1] from `start`; adaptive RK with
// abs tol 1e-10, one Gauss-Newton polish onto the final base target.
// Throws TransversalityLost or TubeExit.
Lift lift_path(const Scene& scene, const BaseCurve& base, double t0, double t1,
               const Vec3& start);

// Parallel projection onto the path: endpoint of the horizontal lift of
// t -> (1 - t) * (f, g)(p) started at p.
Vec3 parallel_project(const Scene& scene, const Vec3& p);

// Horizontal lift of the outward radial base line u -> u * zbar from q on the
// path, evaluated at u = t.
Vec3 psi(const Scene& scene, const Vec3& q, double z1, double z2, double t);

struct FirstReturn {
    double return_time = 0;
    Vec3 return_point{};
    Vec3 section_point{};                 // q(z): start on the section
    std::vector<std::pair<double, Vec3>> trajectory;
};

// First return of the normalized fiber flow T / (1 + |T|^2) to the affine
// section through `anchor` with normal T(anchor); crossings need a sign
// change of the plane distance and a positive T-component; refined to 1e-9.
FirstReturn first_return(const Scene& scene, const Vec3& anchor, double z1, double z2,
                         double max_time = 1000.0);

struct ReturnChart {
    Vec3 anchor{};
    Vec3 normal{};
    double disk_radius = 0.05;
    std::vector<std::array<double, 3>> grid; // (z1, z2, t1)
};

ReturnChart build_return_chart(const Scene& scene, const Vec3& anchor, double disk_radius,
                               int rings, int spokes);

} // namespace nonholo

#endif
