#include "nonholo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nonholo/errors.hpp"

namespace nonholo {

PfaffianConstraint PfaffianConstraint::make(OneForm beta, bool normalize) {
    if (!normalize) return {std::move(beta), false};
    // Rewrite coefficients as b_i / sqrt(b1^2+b2^2+b3^2) so derivatives of the
    // normalized form stay exact under autodiff.
    std::string n = "sqrt((" + beta.b1.print() + ")^2+(" + beta.b2.print() + ")^2+(" +
                    beta.b3.print() + ")^2)";
    OneForm nb{Expr::parse("(" + beta.b1.print() + ")/(" + n + ")"),
               Expr::parse("(" + beta.b2.print() + ")/(" + n + ")"),
               Expr::parse("(" + beta.b3.print() + ")/(" + n + ")")};
    return {std::move(nb), true};
}

namespace {

struct Residual {
    double f, g;
    Vec3 gf, gg;
};

Residual residual_at(const ImplicitLoop& loop, const Vec3& p) {
    auto [fv, gf] = loop.f.eval_grad(p);
    auto [gv, gg] = loop.g.eval_grad(p);
    return {fv, gv, gf, gg};
}

// Minimal-norm Gauss-Newton step for the underdetermined 2x3 system.
bool gn_step(const Residual& r, double ft, double gt, Vec3& step) {
    double a = dot(r.gf, r.gf);
    double b = dot(r.gf, r.gg);
    double c = dot(r.gg, r.gg);
    double det = a * c - b * b;
    if (det <= 1e-30 * (a * c + 1e-300)) return false;
    double rf = r.f - ft, rg = r.g - gt;
    double u = (c * rf - b * rg) / det;
    double v = (a * rg - b * rf) / det;
    step = r.gf * u + r.gg * v;
    return true;
}

} // namespace

Vec3 find_on_level(const ImplicitLoop& loop, const Vec3& guess, double ft, double gt,
                   int max_iter, double tol) {
    Vec3 p = guess;
    std::vector<double> history;
    for (int it = 0; it < max_iter; ++it) {
        Residual r = residual_at(loop, p);
        double res = std::max(std::abs(r.f - ft), std::abs(r.g - gt));
        history.push_back(res);
        if (res < tol) return p;
        Vec3 s;
        if (!gn_step(r, ft, gt, s)) {
            std::ostringstream os;
            os << "singular Jacobian direction at (" << p.x1 << "," << p.x2 << "," << p.x3 << ")";
            throw NoConvergence(os.str());
        }
        p -= s;
    }
    std::ostringstream os;
    os << "no convergence after " << max_iter << " iterations; residuals:";
    for (double h : history) os << " " << h;
    throw NoConvergence(os.str());
}

Vec3 find_on_path(const ImplicitLoop& loop, const Vec3& guess) {
    return find_on_level(loop, guess, 0.0, 0.0, 50, 1e-12);
}

double lyapunov_H(const ImplicitLoop& loop, const Vec3& p) {
    double f = loop.f.eval(p);
    double g = loop.g.eval(p);
    return f * f + g * g;
}

Vec3 grad_H(const ImplicitLoop& loop, const Vec3& p) {
    Residual r = residual_at(loop, p);
    return 2.0 * (r.f * r.gf + r.g * r.gg);
}

int majority_orientation(const std::vector<Vec3>& nodes, const ImplicitLoop& loop,
                         const PfaffianConstraint& constraint) {
    int pos = 0, neg = 0;
    for (const Vec3& p : nodes) {
        Residual r = residual_at(loop, p);
        double s = dot(constraint.vbeta(p), cross(r.gf, r.gg));
        (s > 0 ? pos : neg)++;
    }
    return pos >= neg ? +1 : -1;
}

PathPolyline trace_path(ImplicitLoop& loop, const PfaffianConstraint& constraint, double step) {
    if (step <= 0) throw FieldError("trace step must be positive");
    Vec3 p0 = find_on_path(loop, loop.seed);

    std::vector<Vec3> nodes{p0};
    const int max_nodes = std::max(1000, static_cast<int>(1e7 * step) + 100000);
    Vec3 p = p0;
    double traversed = 0;
    bool closed = false;
    double closure_residual = 0;
    for (int i = 0; i < max_nodes; ++i) {
        Residual r = residual_at(loop, p);
        Vec3 t = cross(r.gf, r.gg);
        double tn = norm(t);
        if (tn < 1e-12 * (norm(r.gf) * norm(r.gg) + 1e-300))
            throw TangencyLoss("grad f x grad g vanishes on the path");
        Vec3 pred = p + t * (step / tn);
        Vec3 corr = find_on_level(loop, pred, 0.0, 0.0, 50, 1e-11);
        double seg = norm(corr - p);
        if (seg < 0.2 * step || seg > 2.0 * step)
            throw NotClosed("corrector produced spacing " + std::to_string(seg) +
                            " outside [0.2,2] x step");
        traversed += seg;
        // closure test: near the start again after a full traversal
        if (traversed > 3 * step && norm(corr - p0) < 0.75 * step) {
            closed = true;
            closure_residual = std::max(std::abs(loop.f.eval(corr)), std::abs(loop.g.eval(corr)));
            p = corr;
            break;
        }
        nodes.push_back(corr);
        p = corr;
    }
    if (!closed) throw NotClosed("open after maximum number of continuation steps");
    if (nodes.size() < 8)
        throw NotClosed("step too coarse: only " + std::to_string(nodes.size()) +
                        " nodes around the loop");

    int orient = majority_orientation(nodes, loop, constraint);
    loop.orientation_sign = orient;
    if (orient < 0) std::reverse(nodes.begin() + 1, nodes.end());

    PathPolyline poly;
    poly.nodes = std::move(nodes);
    poly.step = step;
    poly.cumlen.resize(poly.nodes.size());
    poly.cumlen[0] = 0;
    for (size_t i = 1; i < poly.nodes.size(); ++i)
        poly.cumlen[i] = poly.cumlen[i - 1] + norm(poly.nodes[i] - poly.nodes[i - 1]);
    // the re-arrival point lies on the curve to corrector accuracy; the
    // along-curve offset is absorbed by the closing segment
    poly.closure_gap = closure_residual;
    double closing = norm(poly.nodes.front() - poly.nodes.back());
    poly.total_length = poly.cumlen.back() + closing;
    if (poly.closure_gap > 1e-6 * poly.total_length)
        throw NotClosed("closure residual " + std::to_string(poly.closure_gap));

    // contract checks
    for (const Vec3& q : poly.nodes) {
        double fr = std::abs(loop.f.eval(q));
        double gr = std::abs(loop.g.eval(q));
        if (std::max(fr, gr) > 1e-8) throw NotClosed("node residual above 1e-8");
    }
    if (closing > 2.0 * step) throw NotClosed("closure segment longer than 2 x step");
    return poly;
}

Vec3 fiber_direction(const Scene& scene, const Vec3& p) {
    Residual r = residual_at(scene.loop, p);
    Vec3 t = cross(r.gf, r.gg);
    if (norm(t) < 1e-12 * (norm(r.gf) * norm(r.gg) + 1e-300))
        throw RankDeficient("grad f and grad g are parallel");
    return static_cast<double>(scene.loop.orientation_sign) * t;
}

double theta_on_path(const PathPolyline& path, const Vec3& q) {
    const auto& N = path.nodes;
    size_t n = N.size();
    double best = 1e300, best_len = 0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3& a = N[i];
        const Vec3& b = N[(i + 1) % n];
        Vec3 ab = b - a;
        double L2 = norm2(ab);
        double t = L2 > 0 ? std::clamp(dot(q - a, ab) / L2, 0.0, 1.0) : 0.0;
        Vec3 proj = a + ab * t;
        double d = norm(q - proj);
        if (d < best) {
            best = d;
            double seg = (i + 1 < n) ? (path.cumlen[i + 1] - path.cumlen[i])
                                     : (path.total_length - path.cumlen[n - 1]);
            best_len = path.cumlen[i] + t * seg;
        }
    }
    // chord sagitta of the polyline bounds how far a true on-path point can sit
    double tol = std::max(1e-6, path.step * path.step);
    if (best > tol) throw OffPath("distance to polyline " + std::to_string(best));
    double th = 2.0 * M_PI * best_len / path.total_length;
    if (th >= 2.0 * M_PI) th -= 2.0 * M_PI;
    return th;
}

double unwrap_angle(double prev, double wrapped) {
    double two_pi = 2.0 * M_PI;
    double k = std::round((prev - wrapped) / two_pi);
    return wrapped + k * two_pi;
}

// --- tube sampling ---------------------------------------------------------

TubeSampler::TubeSampler(const Scene& scene, std::uint64_t seed)
    : scene_(scene), state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

double TubeSampler::u01() {
    // xorshift64*; deterministic across platforms
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return static_cast<double>((x * 0x2545F4914F6CDD1Dull) >> 11) * 0x1.0p-53;
}

double TubeSampler::uniform(double a, double b) { return a + (b - a) * u01(); }

Vec3 TubeSampler::next() {
    // H uniform in (delta^2/100, delta^2): avoid the degenerate H ~ 0 shell
    double H0 = scene_.delta2() * (0.01 + 0.99 * u01());
    return next_at(H0);
}

Vec3 TubeSampler::next_at(double H0) {
    const auto& N = scene_.path.nodes;
    for (int attempt = 0; attempt < 8; ++attempt) {
        size_t i = static_cast<size_t>(u01() * static_cast<double>(N.size())) % N.size();
        double psi = uniform(0, 2.0 * M_PI);
        double h = std::sqrt(H0);
        double ft = h * std::cos(psi), gt = h * std::sin(psi);
        try {
            return find_on_level(scene_.loop, N[i], ft, gt, 60, 1e-12);
        } catch (const NoConvergence&) {
            continue; // try another node / angle
        }
    }
    throw NoConvergence("tube sampling failed to reach the requested level set");
}

// --- assumption diagnostics -------------------------------------------------

DiagnosticsReport check_assumptions(const Scene& scene) {
    DiagnosticsReport rep;
    TubeSampler sampler(scene, scene.numerics.rng_seed);
    int budget = std::max(100, scene.numerics.sample_budget);

    // (a) ker beta is 2-dimensional: V_beta bounded away from zero
    {
        CheckEntry e{"kernel-dimension", true, 1e300, 1e-6, {}, ""};
        for (int k = 0; k < budget; ++k) {
            Vec3 p = sampler.next();
            double nb = norm(scene.constraint.vbeta(p));
            if (nb < e.measured) {
                e.measured = nb;
                e.witness = p;
            }
        }
        e.pass = e.measured > e.tolerance;
        rep.checks.push_back(e);
    }

    // (b) transversality over traced nodes, scale-invariant; a sign change of
    // beta(T) between consecutive nodes proves a zero even if no node lands on it
    {
        CheckEntry e{"transversality", true, 1e300, 1e-3, {}, ""};
        const auto& nodes = scene.path.nodes;
        double prev_raw = 0;
        bool sign_change = false;
        for (size_t i = 0; i <= nodes.size(); ++i) {
            const Vec3& p = nodes[i % nodes.size()];
            auto [fv, gf] = scene.loop.f.eval_grad(p);
            auto [gv, gg] = scene.loop.g.eval_grad(p);
            (void)fv; (void)gv;
            Vec3 t = cross(gf, gg);
            Vec3 vb = scene.constraint.vbeta(p);
            double raw = dot(vb, t);
            double denom = norm(vb) * norm(t);
            double m = denom > 0 ? std::abs(raw) / denom : 0.0;
            if (m < e.measured) {
                e.measured = m;
                e.witness = p;
            }
            if (i > 0 && prev_raw * raw < 0) {
                sign_change = true;
                e.witness = p;
            }
            prev_raw = raw;
        }
        if (sign_change) {
            e.measured = 0;
            e.note = "beta(T) changes sign along the path";
        }
        e.pass = !sign_change && e.measured > e.tolerance;
        rep.checks.push_back(e);
    }

    // (c) complete non-holonomicity: |lambda_beta| bounded away from zero
    {
        CheckEntry e{"non-holonomicity", true, 1e300, 1e-6, {}, ""};
        for (int k = 0; k < budget; ++k) {
            Vec3 p = sampler.next();
            double l = std::abs(scene.constraint.lambda(p));
            if (l < e.measured) {
                e.measured = l;
                e.witness = p;
            }
        }
        e.pass = e.measured > e.tolerance;
        rep.checks.push_back(e);
    }

    // (d) |grad H|^2 / H within a finite positive interval of bounded spread
    {
        CheckEntry e{"gradient-ratio", true, 0, 1e4, {}, ""};
        double lo = 1e300, hi = 0;
        Vec3 wlo{}, whi{};
        for (int k = 0; k < budget; ++k) {
            Vec3 p = sampler.next();
            double H = lyapunov_H(scene.loop, p);
            if (H <= 0) continue;
            double ratio = norm2(grad_H(scene.loop, p)) / H;
            if (ratio < lo) { lo = ratio; wlo = p; }
            if (ratio > hi) { hi = ratio; whi = p; }
        }
        e.measured = (lo > 0 && lo < 1e300) ? hi / lo : 1e300;
        e.witness = whi;
        std::ostringstream os;
        os << "ratio range [" << lo << ", " << hi << "]";
        e.note = os.str();
        e.pass = lo > 0 && std::isfinite(hi) && e.measured < e.tolerance;
        rep.checks.push_back(e);
    }

    return rep;
}

} // namespace nonholo
