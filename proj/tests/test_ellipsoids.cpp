#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "mahler/ellipsoids.hpp"
#include "oracles.hpp"

using namespace mahler;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat make_mat(int rows, int cols, std::initializer_list<double> vals) {
    Mat m(rows, cols);
    std::size_t i = 0;
    for (double v : vals) m.a[i++] = v;
    REQUIRE(i == m.a.size());
    return m;
}

// sign patterns with leading +1: one representative per +/- vertex pair
Mat cube_corners(int n) {
    int rows = 1 << (n - 1);
    Mat m(rows, n);
    for (int s = 0; s < rows; ++s) {
        m(s, 0) = 1.0;
        for (int i = 1; i < n; ++i) m(s, i) = (s >> (i - 1)) & 1 ? 1.0 : -1.0;
    }
    return m;
}

}  // namespace

TEST_CASE("mvee of cube corners is the sqrt(n) ball") {
    for (int n = 2; n <= 4; ++n) {
        auto r = mvee_symmetric(cube_corners(n));
        REQUIRE(r.converged);
        Mat expect = (1.0 / n) * Mat::identity(n);
        CHECK(num::max_abs_diff(r.ellipsoid.form(), expect) < 1e-6);
        // every corner certified inside
        for (int i = 0; i < (1 << (n - 1)); ++i) {
            CHECK(num::quad_form(r.ellipsoid.form(), cube_corners(n).row(i)) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("mvee matches an independent grid search") {
    Mat pts = make_mat(3, 2, {1.0, 0.0, 0.3, 1.2, -0.9, 0.7});
    auto r = mvee_symmetric(pts);
    REQUIRE(r.converged);
    Mat oracle_form = oracle::min_area_ellipse_grid(pts);
    double scale = num::frobenius_norm(oracle_form);
    CHECK(num::max_abs_diff(r.ellipsoid.form(), oracle_form) < 2e-3 * scale);
    // tightness: some point must touch the boundary
    double worst = 0.0;
    for (int i = 0; i < pts.rows; ++i)
        worst = std::max(worst, num::quad_form(r.ellipsoid.form(), pts.row(i)));
    CHECK(worst <= 1.0 + 1e-12);
    CHECK(worst >= 1.0 - 1e-6);
}

TEST_CASE("mvee of sampled ellipse boundary recovers the ellipse") {
    Ellipsoid e(make_mat(2, 2, {0.5, 0.2, 0.2, 1.5}));
    auto dirs = rng::unit_directions(2, 192, 4242);
    Mat pts(static_cast<int>(dirs.size()), 2);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        double g = e.gauge(dirs[i]);
        pts(static_cast<int>(i), 0) = dirs[i][0] / g;
        pts(static_cast<int>(i), 1) = dirs[i][1] / g;
    }
    auto r = mvee_symmetric(pts);
    REQUIRE(r.converged);
    CHECK(num::max_abs_diff(r.ellipsoid.form(), e.form()) < 5e-3);
}

TEST_CASE("mvee rejects degenerate point sets") {
    CHECK_THROWS_AS(mvee_symmetric(make_mat(2, 2, {1.0, 0.0, 2.0, 0.0})),
                    std::invalid_argument);
}

TEST_CASE("loewner closed forms") {
    SECTION("an ellipsoid is its own loewner ellipsoid") {
        Ellipsoid e(make_mat(2, 2, {0.5, 0.2, 0.2, 1.5}));
        auto r = loewner(ellipsoid_body(e));
        CHECK(num::max_abs_diff(r.ellipsoid.form(), e.form()) == 0.0);
        CHECK(r.inflation == 1.0);
        CHECK_FALSE(r.sampled);
    }
    SECTION("lp balls get their circumball") {
        auto rcube = loewner(cube(3));
        CHECK(num::max_abs_diff(rcube.ellipsoid.form(), (1.0 / 3.0) * Mat::identity(3)) <
              1e-14);
        auto rcross = loewner(cross_polytope(4));
        CHECK(num::max_abs_diff(rcross.ellipsoid.form(), Mat::identity(4)) < 1e-14);
        // p = 3 in dim 3: radius 3^(1/6)
        auto r3 = loewner(lp_ball(3.0, 3));
        double rad = std::pow(3.0, 1.0 / 6.0);
        CHECK(num::max_abs_diff(r3.ellipsoid.form(), (1.0 / (rad * rad)) * Mat::identity(3)) <
              1e-14);
    }
    SECTION("vertex polytopes go through the exact mvee") {
        SymBody sq = polytope_from_vertices(make_mat(2, 2, {1.0, 1.0, -1.0, 1.0}));
        auto r = loewner(sq);
        CHECK(num::max_abs_diff(r.ellipsoid.form(), 0.5 * Mat::identity(2)) < 1e-6);
        CHECK_FALSE(r.sampled);
    }
    SECTION("linear images transform the child result") {
        Mat t = make_mat(2, 2, {2.0, 1.0, 0.0, 1.0});
        SymBody k = linear_image(t, cap_p(2.0, cube(2), cross_polytope(2)));
        auto inner = loewner(cap_p(2.0, cube(2), cross_polytope(2)));
        auto r = loewner(k);
        Mat t_inv = num::lu_inverse(*num::lu_factor(t));
        Mat expect = t_inv.transposed() * (inner.ellipsoid.form() * t_inv);
        CHECK(num::max_abs_diff(r.ellipsoid.form(), expect) < 1e-12);
    }
    SECTION("intersections borrow the smaller child ellipsoid") {
        SymBody k = cap_p(2.0, cube(2), scale_body(2.0, unit_ball(2)));
        auto r = loewner(k);
        CHECK(num::max_abs_diff(r.ellipsoid.form(), 0.5 * Mat::identity(2)) < 1e-12);
    }
    SECTION("2-product of disks is the round 4-ball exactly") {
        auto r = loewner(prod_p(2.0, unit_ball(2), unit_ball(2)));
        CHECK(num::max_abs_diff(r.ellipsoid.form(), Mat::identity(4)) < 1e-14);
    }
}

TEST_CASE("loewner envelopes contain their bodies") {
    SECTION("p-sums via the inverse form sum") {
        Ellipsoid ea(make_mat(2, 2, {1.0, 0.2, 0.2, 3.0}));
        Ellipsoid eb(make_mat(2, 2, {0.4, -0.1, -0.1, 0.9}));
        for (double p : {1.0, 2.0, 3.0, kInf}) {
            SymBody s = sum_p(p, ellipsoid_body(ea), ellipsoid_body(eb));
            auto r = loewner(s);
            auto dirs = rng::unit_directions(2, 400, 99);
            for (const auto& u : dirs)
                CHECK(s.support(u) <= r.ellipsoid.support(u) * (1.0 + 1e-9));
        }
    }
    SECTION("p-products via the scaled block form") {
        for (double p : {1.0, 2.0, 4.0, kInf}) {
            SymBody k = prod_p(p, cube(2), cross_polytope(2));
            auto r = loewner(k);
            auto dirs = rng::unit_directions(4, 400, 17);
            for (const auto& u : dirs)
                CHECK(k.support(u) <= r.ellipsoid.support(u) * (1.0 + 1e-9));
        }
    }
    SECTION("sampled fallback certifies by probing") {
        // facet form in three dimensions has no structural envelope
        Mat f = make_mat(7, 3,
                         {1.0, 0.0, 0.0, 0.0, 1.3, 0.0, 0.0, 0.0, 0.8,
                          0.67, 0.67, 0.67, 0.67, 0.67, -0.67, 0.67, -0.67, 0.67,
                          0.67, -0.67, -0.67});
        SymBody k = polytope_from_facets(f);
        auto r = loewner(k);
        CHECK(r.sampled);
        CHECK(r.inflation >= 1.0);
        auto dirs = rng::unit_directions(3, 2000, 555);
        Vec x(3);
        for (const auto& u : dirs) {
            double g = k.gauge(u);
            for (int i = 0; i < 3; ++i) x[i] = u[i] / g;
            CHECK(r.ellipsoid.gauge(x) <= 1.0 + 1e-5);
        }
    }
}

TEST_CASE("john ellipsoids by polarity") {
    SECTION("square: the inscribed disk") {
        auto j = john(cube(2));
        CHECK(num::max_abs_diff(j.ellipsoid.form(), Mat::identity(2)) < 1e-12);
        CHECK(j.deflation == 1.0);
    }
    SECTION("p = 3 ball: the unit ball") {
        auto j = john(lp_ball(3.0, 3));
        CHECK(num::max_abs_diff(j.ellipsoid.form(), Mat::identity(3)) < 1e-12);
    }
    SECTION("hexagon: the inscribed disk of apothem sqrt(3)/2") {
        const double s = std::sqrt(3.0) / 2.0;
        SymBody hex = polytope_from_vertices(make_mat(3, 2, {1.0, 0.0, 0.5, s, -0.5, s}));
        auto j = john(hex);
        CHECK(num::max_abs_diff(j.ellipsoid.form(), (4.0 / 3.0) * Mat::identity(2)) < 1e-6);
    }
}

TEST_CASE("sandwich certificates") {
    SECTION("square between a small disk and the circumdisk") {
        auto cert = make_sandwich_certificate(cube(2),
                                              Ellipsoid(100.0 * Mat::identity(2)),
                                              Ellipsoid(0.5 * Mat::identity(2)));
        CHECK_THAT(cert.ratio, WithinRel(14.1421356237309505, 1e-12));
    }
    SECTION("rejects an outer ellipsoid the body escapes") {
        Ellipsoid small_outer(Ellipsoid((1.0 / 1.44) * Mat::identity(2)));
        CHECK_THROWS_WITH(
            make_sandwich_certificate(cube(2), Ellipsoid(100.0 * Mat::identity(2)),
                                      small_outer),
            ContainsSubstring("direction"));
    }
    SECTION("rejects an inner ellipsoid leaving the body") {
        CHECK_THROWS_AS(make_sandwich_certificate(cube(2),
                                                  Ellipsoid(0.9 * Mat::identity(2)),
                                                  Ellipsoid(0.25 * Mat::identity(2))),
                        std::invalid_argument);
    }
    SECTION("rejects non-nested pairs") {
        CHECK_THROWS_AS(make_sandwich_certificate(cube(2), Ellipsoid(Mat::identity(2)),
                                                  Ellipsoid(2.0 * Mat::identity(2))),
                        std::invalid_argument);
    }
    SECTION("john sandwich of the cube has ratio sqrt(n)") {
        auto cert = john_sandwich(cube(3));
        CHECK_THAT(cert.ratio, WithinRel(std::sqrt(3.0), 1e-9));
        CHECK(num::max_abs_diff(cert.inner.form(), Mat::identity(3)) < 1e-12);
        CHECK(num::max_abs_diff(cert.outer.form(), (1.0 / 3.0) * Mat::identity(3)) < 1e-12);
    }
}

TEST_CASE("interpolating ellipsoid through the geometric mean") {
    SECTION("isotropic pair") {
        Ellipsoid inner(100.0 * Mat::identity(2));  // the 0.1 disk
        Ellipsoid outer(0.5 * Mat::identity(2));    // the sqrt(2) disk
        Ellipsoid mid = interpolating_ellipsoid(inner, outer);
        CHECK(num::max_abs_diff(mid.form(), 7.07106781186547524 * Mat::identity(2)) < 1e-10);
        // volume interpolates geometrically
        CHECK_THAT(mid.log_volume(), WithinAbs(0.5 * (inner.log_volume() + outer.log_volume()),
                                               1e-12));
    }
    SECTION("anisotropic pair keeps the defining equation") {
        Ellipsoid inner(make_mat(2, 2, {9.0, 1.0, 1.0, 4.0}));
        Ellipsoid outer(make_mat(2, 2, {0.5, 0.1, 0.1, 0.25}));
        Ellipsoid mid = interpolating_ellipsoid(inner, outer);
        Mat lhs = mid.form() * (inner.form_inv() * mid.form());
        CHECK(num::max_abs_diff(lhs, outer.form()) < 1e-10);
        Mat lhs2 = mid.form() * (outer.form_inv() * mid.form());
        CHECK(num::max_abs_diff(lhs2, inner.form()) < 1e-9);
    }
    SECTION("rejects non-nested pairs") {
        CHECK_THROWS_AS(interpolating_ellipsoid(Ellipsoid(Mat::identity(2)),
                                                Ellipsoid(4.0 * Mat::identity(2))),
                        std::invalid_argument);
    }
}
