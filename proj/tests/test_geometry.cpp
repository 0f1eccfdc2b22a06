#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pvx/geometry.hpp"
#include "test_helpers.hpp"

using namespace pvx;
using pvxtest::random_point;
using pvxtest::random_tangent;

TEST_CASE("geodesic distance on the plane is Euclidean", "[geometry]") {
    Surface s = Surface::plane();
    CHECK(geodesic_distance(s, make_point(s, 0, 0), make_point(s, 3, 4)) == Catch::Approx(5.0));
}

TEST_CASE("antipodal sphere distance is pi R", "[geometry]") {
    Surface s = Surface::sphere(1.0);
    CHECK(geodesic_distance(s, make_point(s, 0, 0, 1), make_point(s, 0, 0, -1)) ==
          Catch::Approx(kPi));
    Surface s2 = Surface::sphere(2.5);
    CHECK(geodesic_distance(s2, make_point(s2, 0, 0, 1), make_point(s2, 0, 0, -1)) ==
          Catch::Approx(2.5 * kPi));
}

TEST_CASE("torus distance takes the shortest lattice representative", "[geometry]") {
    Surface s = Surface::flat_torus(1.0, 1.0);
    CHECK(geodesic_distance(s, make_point(s, 0.1, 0), make_point(s, 0.9, 0)) ==
          Catch::Approx(0.2));

    // Oracle: brute force over a 5x5 block of images confirms the 3x3
    // block built into the implementation.
    std::mt19937 rng(7001);
    Surface st = Surface::flat_torus(1.0, 2.0);
    for (int it = 0; it < 200; ++it) {
        SurfacePoint p = random_point(st, rng), q = random_point(st, rng);
        double best = 1e300;
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j) {
                double dx = p.r.x - q.r.x + i * st.period1();
                double dy = p.r.y - q.r.y + j * st.period2();
                best = std::min(best, std::hypot(dx, dy));
            }
        CHECK(geodesic_distance(st, p, q) == Catch::Approx(best).margin(1e-14));
    }
}

TEST_CASE("distance symmetry and triangle inequality", "[geometry]") {
    std::mt19937 rng(7002);
    for (Surface s : {Surface::plane(), Surface::sphere(1.3), Surface::flat_torus(1.0, 1.7)}) {
        for (int it = 0; it < 300; ++it) {
            SurfacePoint a = random_point(s, rng), b = random_point(s, rng),
                         c = random_point(s, rng);
            double ab = geodesic_distance(s, a, b);
            double ba = geodesic_distance(s, b, a);
            REQUIRE(std::abs(ab - ba) < 1e-10);
            REQUIRE(ab >= 0.0);
            REQUIRE(ab <= geodesic_distance(s, a, c) + geodesic_distance(s, c, b) + 1e-10);
        }
        SurfacePoint p = random_point(s, rng);
        CHECK(geodesic_distance(s, p, p) == 0.0);
    }
}

TEST_CASE("J rotates the plane basis", "[geometry]") {
    Surface s = Surface::plane();
    SurfacePoint o = make_point(s, 0, 0);
    TangentVector j1 = rotate_j(s, make_tangent(s, o, Vec3{1, 0, 0}));
    CHECK(j1.v.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(j1.v.y == Catch::Approx(1.0));
    TangentVector j2 = rotate_j(s, make_tangent(s, o, Vec3{0, 1, 0}));
    CHECK(j2.v.x == Catch::Approx(-1.0));
    CHECK(j2.v.y == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("J at the north pole maps x to y", "[geometry]") {
    Surface s = Surface::sphere(1.0);
    SurfacePoint np = make_point(s, 0, 0, 1);
    TangentVector j = rotate_j(s, make_tangent(s, np, Vec3{1, 0, 0}));
    CHECK(j.v.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(j.v.y == Catch::Approx(1.0));
    CHECK(j.v.z == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("J is a norm-preserving complex structure", "[geometry]") {
    std::mt19937 rng(7003);
    for (Surface s : {Surface::plane(), Surface::sphere(2.0), Surface::flat_torus(1.4, 0.8)}) {
        for (int it = 0; it < 1000; ++it) {
            SurfacePoint p = random_point(s, rng);
            TangentVector v = random_tangent(s, p, rng);
            TangentVector jv = rotate_j(s, v);
            REQUIRE(std::abs(norm(s, jv) - norm(s, v)) < 1e-12 * (1.0 + norm(s, v)));
            REQUIRE(std::abs(inner(s, jv, v)) < 1e-12 * (1.0 + inner(s, v, v)));
            TangentVector jjv = rotate_j(s, jv);
            REQUIRE(norm(jjv.v + v.v) < 1e-12 * (1.0 + norm(v.v)));
        }
    }
}

TEST_CASE("retract is exact on flat surfaces and zero-step safe", "[geometry]") {
    Surface s = Surface::plane();
    SurfacePoint q = retract(s, make_point(s, 0, 0), Vec3{1, 0, 0}, 0.5);
    CHECK(q.r.x == Catch::Approx(0.5));
    CHECK(q.r.y == 0.0);

    Surface sp = Surface::sphere(1.0);
    SurfacePoint np = make_point(sp, 0, 0, 1);
    SurfacePoint same = retract(sp, np, Vec3{0.3, 0.1, 0}, 0.0);
    CHECK(norm(same.r - np.r) == 0.0);

    Surface st = Surface::flat_torus(1.0, 1.0);
    SurfacePoint w = retract(st, make_point(st, 0.9, 0.5), Vec3{1, 0, 0}, 0.2);
    CHECK(w.r.x == Catch::Approx(0.1).margin(1e-14));
}

TEST_CASE("sphere retract matches the great circle to first order", "[geometry]") {
    Surface s = Surface::sphere(1.0);
    SurfacePoint np = make_point(s, 0, 0, 1);
    Vec3 v{1, 0, 0};
    SurfacePoint q = retract(s, np, v, 0.01);
    CHECK(std::abs(norm(q.r) - 1.0) < 1e-15);
    CHECK(std::abs(geodesic_distance(s, np, q) - 0.01) < 1e-5);
    // exact great-circle oracle
    SurfacePoint e = geodesic_step(s, np, v, 0.01);
    CHECK(geodesic_distance(s, q, e) < 1e-6);
    CHECK(std::abs(geodesic_distance(s, np, e) - 0.01) < 1e-15);
}

TEST_CASE("retract h vs h/2 twice agrees to second order", "[geometry]") {
    std::mt19937 rng(7004);
    for (Surface s : {Surface::plane(), Surface::sphere(1.0), Surface::flat_torus(2.0, 1.0)}) {
        for (int it = 0; it < 50; ++it) {
            SurfacePoint p = random_point(s, rng);
            TangentVector v = random_tangent(s, p, rng);
            double h = 0.05;
            SurfacePoint one = retract(s, p, v.v, h);
            SurfacePoint half = retract(s, retract(s, p, v.v, 0.5 * h), v.v, 0.5 * h);
            double d_h = geodesic_distance(s, one, half);
            // O(h^2) defect: shrink h by 4, defect shrinks ~16x (allow 8x).
            SurfacePoint one4 = retract(s, p, v.v, h / 4.0);
            SurfacePoint half4 = retract(s, retract(s, p, v.v, h / 8.0), v.v, h / 8.0);
            double d_h4 = geodesic_distance(s, one4, half4);
            if (d_h > 1e-12) REQUIRE(d_h4 < d_h / 8.0 + 1e-13);
        }
    }
}

TEST_CASE("metric inner products", "[geometry]") {
    Surface s = Surface::plane();
    SurfacePoint o = make_point(s, 0, 0);
    CHECK(inner(s, make_tangent(s, o, Vec3{1, 0, 0}), make_tangent(s, o, Vec3{0, 1, 0})) == 0.0);

    Surface sp = Surface::sphere(1.0);
    SurfacePoint np = make_point(sp, 0, 0, 1);
    TangentVector t = make_tangent(sp, np, Vec3{1, 0, 0});
    CHECK(inner(sp, t, t) == Catch::Approx(1.0));

    // Physical radius enters the metric: same chart vector, radius R.
    Surface sp2 = Surface::sphere(3.0);
    SurfacePoint np2 = make_point(sp2, 0, 0, 1);
    TangentVector t2 = make_tangent(sp2, np2, Vec3{1, 0, 0});
    CHECK(inner(sp2, t2, t2) == Catch::Approx(9.0));

    Surface st = Surface::flat_torus(1.0, 1.0);
    SurfacePoint tp = make_point(st, 0.3, 0.4);
    CHECK(inner(st, make_tangent(st, tp, Vec3{1, 2, 0}), make_tangent(st, tp, Vec3{3, 4, 0})) ==
          Catch::Approx(11.0));
}

TEST_CASE("point validation and invariants", "[geometry]") {
    Surface sp = Surface::sphere(1.0);
    SurfacePoint p = make_point(sp, 3, 4, 0);
    CHECK(valid_point(sp, p));
    CHECK(std::abs(norm(p.r) - 1.0) < 1e-15);

    Surface st = Surface::flat_torus(1.0, 2.0);
    SurfacePoint q = make_point(st, -0.25, 2.5);
    CHECK(valid_point(st, q));
    CHECK(q.r.x == Catch::Approx(0.75));
    CHECK(q.r.y == Catch::Approx(0.5));

    CHECK_THROWS_AS(Surface::sphere(0.0), std::invalid_argument);
    CHECK_THROWS_AS(Surface::flat_torus(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("surface areas", "[geometry]") {
    CHECK(std::isinf(Surface::plane().area()));
    CHECK_FALSE(Surface::plane().closed());
    CHECK(Surface::sphere(2.0).area() == Catch::Approx(16.0 * kPi));
    CHECK(Surface::flat_torus(1.5, 2.0).area() == Catch::Approx(3.0));
}
