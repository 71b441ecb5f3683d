#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nonholo/scene.hpp"
#include "nonholo/scenefile.hpp"
#include "test_util.hpp"

using namespace nonholo;
using testutil::Rng;

namespace {

ImplicitLoop circle_loop() {
    ImplicitLoop loop;
    loop.f = Expr::parse("x1^2+x2^2-1");
    loop.g = Expr::parse("x3");
    loop.seed = {1.1, 0, 0.05};
    loop.tube_radius = 0.5;
    return loop;
}

PfaffianConstraint heisenberg() {
    return PfaffianConstraint::make(OneForm::parse("-x2", "x1", "1"), false);
}

} // namespace

TEST_CASE("find_on_path converges quadratically from a nearby guess") {
    ImplicitLoop loop = circle_loop();
    Vec3 p = find_on_path(loop, {1.1, 0, 0.05});
    CHECK(norm(p - Vec3{1, 0, 0}) < 1e-9);

    // already on the path: returned essentially unchanged
    Vec3 q = find_on_path(loop, p);
    CHECK(norm(q - p) < 1e-12);

    // the axis is a singular direction for this loop
    CHECK_THROWS_AS(find_on_path(loop, {0, 0, 0}), NoConvergence);
}

TEST_CASE("trace_path closes the circle with the right length and orientation") {
    ImplicitLoop loop = circle_loop();
    PathPolyline path = trace_path(loop, heisenberg(), 0.05);
    CHECK(std::abs(path.total_length - 2 * M_PI) < 1e-3 * 2 * M_PI);
    CHECK(loop.orientation_sign == -1); // beta(grad f x grad g) < 0 for this scene

    // all nodes on the path, spacing within contract
    for (size_t i = 0; i < path.nodes.size(); ++i) {
        const Vec3& n = path.nodes[i];
        CHECK(std::abs(loop.f.eval(n)) < 1e-8);
        CHECK(std::abs(loop.g.eval(n)) < 1e-8);
        if (i > 0) {
            double d = path.cumlen[i] - path.cumlen[i - 1];
            CHECK(d > 0.2 * 0.05);
            CHECK(d < 2.0 * 0.05);
        }
    }

    // traced orientation advances counterclockwise in (x1, x2)
    double a0 = std::atan2(path.nodes[0].x2, path.nodes[0].x1);
    double a1 = std::atan2(path.nodes[1].x2, path.nodes[1].x1);
    CHECK(std::remainder(a1 - a0, 2 * M_PI) > 0);
}

TEST_CASE("trace_path with an over-coarse step reports failure") {
    ImplicitLoop loop = circle_loop();
    CHECK_THROWS_AS(trace_path(loop, heisenberg(), 2.5), NotClosed);
}

TEST_CASE("orientation-stability: retracing from any node reproduces the length") {
    ImplicitLoop loop = circle_loop();
    PathPolyline path = trace_path(loop, heisenberg(), 0.02);
    for (size_t k : {size_t(7), size_t(120), size_t(300)}) {
        ImplicitLoop loop2 = circle_loop();
        loop2.seed = path.nodes[k % path.nodes.size()];
        PathPolyline p2 = trace_path(loop2, heisenberg(), 0.02);
        CHECK(std::abs(p2.total_length - path.total_length) < 1e-6 * path.total_length);
        CHECK(loop2.orientation_sign == loop.orientation_sign);
    }
}

TEST_CASE("lyapunov H and its exact gradient") {
    ImplicitLoop loop = circle_loop();
    // on the path both vanish
    Vec3 on = find_on_path(loop, {0, 1.05, -0.02});
    CHECK(lyapunov_H(loop, on) < 1e-18);
    CHECK(norm(grad_H(loop, on)) < 1e-8);

    // frozen hand arithmetic at (1.1, 0, 0)
    Vec3 p{1.1, 0, 0};
    CHECK(lyapunov_H(loop, p) == doctest::Approx(0.0441).epsilon(1e-12));
    Vec3 gH = grad_H(loop, p);
    CHECK(gH.x1 == doctest::Approx(0.924).epsilon(1e-12));
    CHECK(gH.x2 == 0.0);
    CHECK(gH.x3 == 0.0);

    // gradient matches central differences of H
    Rng rng;
    Expr He = Expr::parse("(x1^2+x2^2-1)^2 + x3^2");
    for (int i = 0; i < 50; ++i) {
        Vec3 q = rng.vec(-1.3, 1.3);
        Vec3 g = grad_H(loop, q);
        Vec3 fd = testutil::fd_gradient(He, q);
        CHECK(norm(g - fd) < 1e-6 * (1 + norm(g)));
    }
}

TEST_CASE("fiber_direction respects the frozen orientation") {
    auto ls = testutil::golden_scene();
    Vec3 T = fiber_direction(ls.scene, {1, 0, 0});
    CHECK(T.x1 == doctest::Approx(0.0));
    CHECK(T.x2 == doctest::Approx(2.0));
    CHECK(T.x3 == doctest::Approx(0.0));

    // scaling f scales T but never flips the chosen orientation
    Scene scaled = ls.scene;
    scaled.loop.f = Expr::parse("3*(x1^2+x2^2-1)");
    Vec3 T3 = fiber_direction(scaled, {1, 0, 0});
    CHECK(norm(T3 - 3.0 * T) < 1e-12);
    CHECK(dot(scaled.constraint.vbeta({1, 0, 0}), T3) > 0);

    // parallel gradients
    Scene degenerate = ls.scene;
    degenerate.loop.f = Expr::parse("x3");
    CHECK_THROWS_AS(fiber_direction(degenerate, {0.3, 0.2, 0.1}), RankDeficient);
}

TEST_CASE("theta_on_path anchors, antipode, unwrap") {
    auto ls = testutil::golden_scene();
    const PathPolyline& path = ls.scene.path;

    CHECK(theta_on_path(path, path.nodes[0]) == doctest::Approx(0.0).epsilon(1e-12));

    // antipodal node sits at pi up to the node spacing
    size_t half = path.nodes.size() / 2;
    double th = theta_on_path(path, path.nodes[half]);
    CHECK(std::abs(th - M_PI) < 2 * M_PI * path.step / path.total_length + 1e-6);

    CHECK_THROWS_AS(theta_on_path(path, Vec3{1.4, 0, 0.3}), OffPath);

    // unwrap produces a monotone lift across the 0/2pi seam
    double prev = 6.2;
    double w = theta_on_path(path, path.nodes[1]); // small positive angle
    double lifted = unwrap_angle(prev, w);
    CHECK(lifted > 6.2);
    CHECK(std::abs(lifted - (w + 2 * M_PI)) < 1e-12);
}

TEST_CASE("check_assumptions: golden scene passes with lambda = 2") {
    auto ls = testutil::golden_scene();
    DiagnosticsReport rep = check_assumptions(ls.scene);
    CHECK(rep.all_pass());
    const CheckEntry* nh = rep.find("non-holonomicity");
    REQUIRE(nh != nullptr);
    CHECK(nh->measured == doctest::Approx(2.0).epsilon(1e-9));
    const CheckEntry* ratio = rep.find("gradient-ratio");
    REQUIRE(ratio != nullptr);
    CHECK(ratio->measured < 1e4);
}

TEST_CASE("check_assumptions: integrable constraint fails (b) and (c)") {
    auto ls = load_scene(testutil::scene_path("integrable.json"));
    DiagnosticsReport rep = check_assumptions(ls.scene);
    CHECK_FALSE(rep.all_pass());
    CHECK(rep.find("kernel-dimension")->pass);
    CHECK_FALSE(rep.find("transversality")->pass);
    CHECK_FALSE(rep.find("non-holonomicity")->pass);
}

TEST_CASE("check_assumptions: vertical circle loses transversality at two nodes") {
    auto ls = load_scene(testutil::scene_path("vertical_circle.json"));
    DiagnosticsReport rep = check_assumptions(ls.scene);
    const CheckEntry* tv = rep.find("transversality");
    REQUIRE(tv != nullptr);
    CHECK_FALSE(tv->pass);
    // witness sits near the x1 = 0 nodes where beta(T) vanishes
    CHECK(std::abs(tv->witness.x1) < 0.05);
}

TEST_CASE("assumption checks are monotone when the tube shrinks") {
    auto ls = testutil::golden_scene();
    ls.scene.numerics.sample_budget = 2000;
    DiagnosticsReport wide = check_assumptions(ls.scene);
    Scene narrow = ls.scene;
    narrow.loop.tube_radius = 0.25;
    DiagnosticsReport tight = check_assumptions(narrow);
    // shrinking delta never turns a pass into a fail for (a), (c)
    CHECK(tight.find("kernel-dimension")->pass >= wide.find("kernel-dimension")->pass);
    CHECK(tight.find("non-holonomicity")->pass >= wide.find("non-holonomicity")->pass);
}

TEST_CASE("gradient-ratio spread at desk scale") {
    auto ls = testutil::golden_scene();
    TubeSampler sampler(ls.scene, 77);
    double lo = 1e300, hi = 0;
    for (int i = 0; i < 10000; ++i) {
        Vec3 p = sampler.next();
        double H = lyapunov_H(ls.scene.loop, p);
        if (H <= 0) continue;
        double r = norm2(grad_H(ls.scene.loop, p)) / H;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    CHECK(lo > 0);
    CHECK(hi < 1e300);
    CHECK(hi / lo < 1e4);
}
