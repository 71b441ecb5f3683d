#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nonholo/connection.hpp"
#include "nonholo/scenefile.hpp"
#include "test_util.hpp"

using namespace nonholo;
using testutil::Rng;

TEST_CASE("horizontal velocity solves the three equations") {
    auto ls = testutil::golden_scene();
    const Scene& sc = ls.scene;

    // zero base velocity -> zero lift
    Vec3 v0 = horizontal_velocity(sc, {1.05, 0, 0.01}, 0, 0);
    CHECK(norm(v0) == 0.0);

    // golden point: solved components checked by residuals
    Vec3 p{1, 0, 0};
    Vec3 v = horizontal_velocity(sc, p, 1, 0);
    auto [fv, gf] = sc.loop.f.eval_grad(p);
    auto [gv, gg] = sc.loop.g.eval_grad(p);
    (void)fv; (void)gv;
    Vec3 vb = sc.constraint.vbeta(p);
    CHECK(std::abs(dot(gf, v) - 1.0) < 1e-12);
    CHECK(std::abs(dot(gg, v)) < 1e-12);
    CHECK(std::abs(dot(vb, v)) < 1e-12);
    CHECK(v.x1 == doctest::Approx(0.5));

    // linear in the base velocity
    Rng rng;
    for (int i = 0; i < 50; ++i) {
        Vec3 q = find_on_level(sc.loop, sc.path.nodes[i % sc.path.nodes.size()],
                               rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
        double w1 = rng.uniform(-1, 1), w2 = rng.uniform(-1, 1);
        double u1 = rng.uniform(-1, 1), u2 = rng.uniform(-1, 1);
        Vec3 a = horizontal_velocity(sc, q, w1, w2);
        Vec3 b = horizontal_velocity(sc, q, u1, u2);
        Vec3 ab = horizontal_velocity(sc, q, w1 + u1, w2 + u2);
        CHECK(norm(a + b - ab) < 1e-11 * (norm(ab) + 1));
    }
}

TEST_CASE("horizontal solve reports lost transversality") {
    auto ls = load_scene(testutil::scene_path("integrable.json"));
    // for beta = dx3 and g = x3 the rows are linearly dependent everywhere
    CHECK_THROWS_AS(horizontal_velocity(ls.scene, {1.05, 0, 0.02}, 1, 0), TransversalityLost);
}

TEST_CASE("lift of a constant base curve is stationary") {
    auto ls = testutil::golden_scene();
    Vec3 start = find_on_level(ls.scene.loop, {1.1, 0, 0.05}, 0.21, 0.05);
    Lift lift = lift_path(
        ls.scene, [](double) -> std::array<double, 2> { return {0.21, 0.05}; }, 0, 1, start);
    CHECK(norm(lift.end - start) < 1e-9);
}

TEST_CASE("closed base loop returns to the same fiber; residual contract") {
    auto ls = testutil::golden_scene();
    double r = 0.18;
    Vec3 start = find_on_level(ls.scene.loop, {1.1, 0, 0}, r, 0);
    Lift lift = lift_path(
        ls.scene,
        [r](double t) -> std::array<double, 2> {
            return {r * std::cos(2 * M_PI * t), r * std::sin(2 * M_PI * t)};
        },
        0, 1, start);
    double f = ls.scene.loop.f.eval(lift.end);
    double g = ls.scene.loop.g.eval(lift.end);
    CHECK(std::abs(f - r) < 1e-8);
    CHECK(std::abs(g) < 1e-8);
    // the holonomy displacement along the fiber is the measured output
    double drift = norm(lift.end - start);
    CHECK(drift > 1e-4); // non-holonomic: the loop does not close in space
    for (const auto& lp : lift.points) {
        CHECK(lp.base_err < 1e-7);
        CHECK(lp.beta_resid < 1e-7);
    }
}

TEST_CASE("radial lift lands on the path: golden endpoint") {
    auto ls = testutil::golden_scene();
    Vec3 p{1.1, 0, 0};
    Lift lift = lift_path(
        ls.scene,
        [](double t) -> std::array<double, 2> { return {(1 - t) * 0.21, 0.0}; }, 0, 1, p);
    CHECK(std::abs(ls.scene.loop.f.eval(lift.end)) < 1e-8);
    CHECK(std::abs(ls.scene.loop.g.eval(lift.end)) < 1e-8);
    // zero vertical displacement: the in-plane radial lift stays at angle 0
    CHECK(norm(lift.end - Vec3{1, 0, 0}) < 1e-8);
}

TEST_CASE("parallel projection: fixed points, golden values, idempotence") {
    auto ls = testutil::golden_scene();
    const Scene& sc = ls.scene;

    // points on the path are fixed
    Vec3 q0 = sc.path.nodes[11];
    CHECK(norm(parallel_project(sc, q0) - q0) < 1e-10);

    // frozen golden value: (1.1, 0, 0) projects to (1, 0, 0) exactly
    Vec3 t0 = parallel_project(sc, {1.1, 0, 0});
    CHECK(norm(t0 - Vec3{1, 0, 0}) < 1e-9);

    // hand-derived angle for (1.1, 0, 0.05): (0.05/0.21) * ln(1.21)
    Vec3 t1 = parallel_project(sc, {1.1, 0, 0.05});
    double expect = (0.05 / 0.21) * std::log(1.21);
    CHECK(std::atan2(t1.x2, t1.x1) == doctest::Approx(expect).epsilon(1e-9));

    // idempotence and radial-lift invariance
    TubeSampler sampler(sc, 15);
    for (int i = 0; i < 10; ++i) {
        Vec3 p = sampler.next();
        Vec3 q = parallel_project(sc, p);
        CHECK(std::abs(sc.loop.f.eval(q)) < 1e-8);
        CHECK(std::abs(sc.loop.g.eval(q)) < 1e-8);
        CHECK(norm(parallel_project(sc, q) - q) < 2e-8);

        // two points on the same radial lift project to the same spot
        double f = sc.loop.f.eval(p), g = sc.loop.g.eval(p);
        Vec3 halfway = psi(sc, q, f, g, 0.5);
        CHECK(norm(parallel_project(sc, halfway) - q) < 1e-7);
    }
}

TEST_CASE("psi: anchor, roundtrip, non-intersection") {
    auto ls = testutil::golden_scene();
    const Scene& sc = ls.scene;
    Vec3 q = sc.path.nodes[40];

    CHECK(norm(psi(sc, q, 0.1, -0.15, 0) - q) == 0.0);

    for (double t : {0.25, 0.5, 1.0}) {
        Vec3 up = psi(sc, q, 0.2, 0.1, t);
        CHECK(norm(parallel_project(sc, up) - q) < 1e-7);
    }

    // lifts from distinct path points never meet (sampled t grid)
    Vec3 q2 = sc.path.nodes[45];
    for (double t : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        Vec3 a = psi(sc, q, 0.2, 0.1, t);
        Vec3 b = psi(sc, q2, 0.2, 0.1, t);
        CHECK(norm(a - b) > 1e-4);
    }
}

TEST_CASE("first return on the golden scene: 5*pi at the center") {
    auto ls = testutil::golden_scene();
    Vec3 anchor = find_on_path(ls.scene.loop, {1, 0, 0});
    FirstReturn fr = first_return(ls.scene, anchor, 0, 0);
    CHECK(std::abs(fr.return_time - 5 * M_PI) < 1e-6);
    CHECK(norm(fr.return_point - fr.section_point) < 1e-7);
}

TEST_CASE("first return varies smoothly over the chart disk") {
    auto ls = testutil::golden_scene();
    Vec3 anchor = find_on_path(ls.scene.loop, {1, 0, 0});
    ReturnChart chart = build_return_chart(ls.scene, anchor, 0.05, 2, 6);
    double lo = 1e300, hi = 0;
    for (const auto& g : chart.grid) {
        CHECK(g[2] > 0);
        lo = std::min(lo, g[2]);
        hi = std::max(hi, g[2]);
    }
    CHECK((hi - lo) / lo < 0.10);
    // analytic: t1 = pi * (5 + 4 f) for this scene
    for (const auto& g : chart.grid)
        CHECK(g[2] == doctest::Approx(M_PI * (5 + 4 * g[0])).epsilon(2e-4));
}

TEST_CASE("degenerate sections are reported") {
    auto ls = testutil::golden_scene();
    Vec3 anchor = find_on_path(ls.scene.loop, {1, 0, 0});
    // the level set f = -1.5 is empty for this path: the section point
    // construction cannot converge
    CHECK_THROWS_AS(first_return(ls.scene, anchor, -1.5, 0.0), SectionDegenerate);
}

TEST_CASE("projection preserves the cyclic order along a fiber") {
    auto ls = testutil::golden_scene();
    const Scene& sc = ls.scene;
    // walk one fiber (fixed f, g) in the positive fiber direction
    Vec3 p = find_on_level(sc.loop, {1.1, 0, 0.1}, 0.15, 0.1);
    OdeField rhs = [&](double, const Vec3& y) {
        Vec3 t = fiber_direction(sc, y);
        return t / (1.0 + norm2(t));
    };
    std::vector<double> thetas;
    Vec3 y = p;
    double t = 0, h = 0.05;
    AdaptiveControl ctrl{1e-10, 1e-10, 1e-14, 0.05};
    double prev = theta_on_path(sc.path, parallel_project(sc, y));
    thetas.push_back(prev);
    for (int i = 0; i < 40; ++i) {
        adaptive_step(rhs, t, y, h, ctrl);
        double th = unwrap_angle(thetas.back(), theta_on_path(sc.path, parallel_project(sc, y)));
        thetas.push_back(th);
    }
    for (size_t i = 1; i < thetas.size(); ++i) CHECK(thetas[i] > thetas[i - 1]);
    // the fiber has (f, g) fixed along the walk
    CHECK(sc.loop.f.eval(y) == doctest::Approx(0.15).epsilon(1e-7));
    CHECK(sc.loop.g.eval(y) == doctest::Approx(0.1).epsilon(1e-7));
}
