#ifndef NONHOLO_SCENE_HPP
#define NONHOLO_SCENE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonholo/calc3.hpp"

namespace nonholo {

// Single Pfaffian velocity constraint beta = 0.  With `normalize` set the
// coefficients are rewritten as b_i / |V_beta| at construction, which leaves
// ker(beta) unchanged.
struct PfaffianConstraint {
    OneForm beta;
    bool normalized = false;

    static PfaffianConstraint make(OneForm beta, bool normalize);
    Vec3 vbeta(const Vec3& p) const { return riesz(beta, p); }
    double lambda(const Vec3& p) const { return lambda_beta(beta, p); }
};

// Desired path {f = 0, g = 0} with a seed near it and a tube radius delta
// measured in the (f, g) residual metric (tube membership is H <= delta^2).
struct ImplicitLoop {
    Expr f, g;
    Vec3 seed;
    double tube_radius = 0.1;
    int orientation_sign = +1; // applied to grad f x grad g; set by trace_path
};

struct PathPolyline {
    std::vector<Vec3> nodes;      // closed: nodes.front() ~ nodes.back() not duplicated
    std::vector<double> cumlen;   // cumlen[i] = arc length from node 0 to node i
    double total_length = 0;      // includes the closing segment
    double closure_gap = 0;
    double step = 0;              // requested tracing step
};

struct Numerics {
    double step = 0.01;          // path tracing step
    double abs_tol = 1e-10;      // connection / flow ODE tolerance
    double rel_tol = 1e-10;
    double eps_conv = 1e-8;      // H threshold for convergence termination
    double max_time = 500.0;
    int max_steps = 2000000;
    int theta_cadence = 10;      // Theta sampled every k-th accepted step
    int sample_budget = 10000;   // tube samples for diagnostics
    std::uint64_t rng_seed = 20240801;
};

struct Scene {
    PfaffianConstraint constraint;
    ImplicitLoop loop;
    PathPolyline path;
    Numerics numerics;
    Expr fiber_angle; // optional analytic chart angle (empty() when absent)

    double delta2() const { return loop.tube_radius * loop.tube_radius; }
};

// Gauss-Newton onto {f = 0, g = 0}; |f|,|g| < 1e-10 in at most 50 iterations.
Vec3 find_on_path(const ImplicitLoop& loop, const Vec3& guess);

// Gauss-Newton onto the level set (f, g) = target from `guess`.
Vec3 find_on_level(const ImplicitLoop& loop, const Vec3& guess, double ftarget, double gtarget,
                   int max_iter = 50, double tol = 1e-12);

// Predictor-corrector continuation along grad f x grad g.  Fixes
// loop.orientation_sign from the majority sign of beta(grad f x grad g) so
// that beta(T) > 0 on the traced nodes, and orients the polyline accordingly.
PathPolyline trace_path(ImplicitLoop& loop, const PfaffianConstraint& constraint, double step);

double lyapunov_H(const ImplicitLoop& loop, const Vec3& p);
// grad H = 2 (f grad f + g grad g); the exact differential of H.
Vec3 grad_H(const ImplicitLoop& loop, const Vec3& p);

// T = orientation_sign * (grad f x grad g); beta(T) > 0 on traced nodes.
Vec3 fiber_direction(const Scene& scene, const Vec3& p);

// Arc-length angle of a near-path point q, in [0, 2*pi).
double theta_on_path(const PathPolyline& path, const Vec3& q);

// Continuous lift: choose the branch of `wrapped` closest to `prev`.
double unwrap_angle(double prev, double wrapped);

struct CheckEntry {
    std::string name;
    bool pass = false;
    double measured = 0;
    double tolerance = 0;
    Vec3 witness{};
    std::string note;
};

struct DiagnosticsReport {
    std::vector<CheckEntry> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    const CheckEntry* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

// (a) kernel dimension (V_beta nonvanishing on tube samples)
// (b) transversality of the path to ker(beta), normalized, over nodes
// (c) complete non-holonomicity: min |lambda_beta| over tube samples
// (d) finite spread of |grad H|^2 / H over tube samples
DiagnosticsReport check_assumptions(const Scene& scene);

// Deterministic tube sample: node index + (f,g)-disk target, Newton-lifted.
// Used by diagnostics and the verification suite.
class TubeSampler {
public:
    TubeSampler(const Scene& scene, std::uint64_t seed);
    Vec3 next();                    // H uniform-ish in (0, delta^2)
    Vec3 next_at(double H0);        // sample with H = H0 exactly (to Newton tol)
    double uniform(double a, double b);

private:
    const Scene& scene_;
    std::uint64_t state_;
    double u01();
};

// Fix the traced orientation once: majority sign of beta over raw tangents.
int majority_orientation(const std::vector<Vec3>& nodes, const ImplicitLoop& loop,
                         const PfaffianConstraint& constraint);

} // namespace nonholo

#endif
