#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mahler/numkernel.hpp"
#include "mahler/rng.hpp"
#include "oracles.hpp"

using namespace mahler::num;

namespace {

Mat make_mat(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = static_cast<int>(rows.begin()->size());
    Mat m(r, c);
    int i = 0;
    for (const auto& row : rows) {
        int j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Mat random_spd(int n, std::uint64_t seed, double jitter = 1.0) {
    mahler::rng::Stream s(seed, 7);
    Mat b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = s.normal();
    Mat m = b.transposed() * b;
    for (int i = 0; i < n; ++i) m(i, i) += jitter;
    return symmetrized(m);
}

}  // namespace

TEST_CASE("log_gamma matches reference values and library oracle") {
    CHECK(std::abs(log_gamma(1.0)) < 1e-14);
    CHECK(std::abs(log_gamma(2.0)) < 1e-14);
    CHECK(log_gamma(0.5) == Catch::Approx(0.572364942924700087).epsilon(1e-13));
    CHECK(log_gamma(5.0) == Catch::Approx(3.178053830347945620).epsilon(1e-13));

    // Dense sweep against the C library's lgamma.
    for (double x = 0.5; x <= 200.0; x += 0.173) {
        double ref = std::lgamma(x);
        CHECK(std::abs(log_gamma(x) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
    CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
    CHECK_THROWS_AS(log_gamma(-3.0), std::domain_error);
}

TEST_CASE("log_gamma satisfies the recurrence ln G(x+1) = ln G(x) + ln x") {
    mahler::rng::Stream s(42, 0);
    for (int k = 0; k < 200; ++k) {
        double x = 0.5 + 80.0 * s.uniform();
        double lhs = log_gamma(x + 1.0);
        double rhs = log_gamma(x) + std::log(x);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("frac_binom on integers, halves, and edges") {
    CHECK(frac_binom(4, 2) == Catch::Approx(6.0).epsilon(1e-12));
    CHECK(frac_binom(10, 3) == Catch::Approx(120.0).epsilon(1e-12));
    // 1 choose 1/2 = 1/Gamma(3/2)^2 = 4/pi, checked against an independent
    // high-precision evaluation.
    CHECK(frac_binom(1, 0.5) == Catch::Approx(1.27323954473516268615).epsilon(1e-12));
    CHECK(frac_binom(7, 0) == 1.0);
    CHECK(frac_binom(7, 7) == 1.0);
    CHECK_THROWS_AS(frac_binom(2, 3), std::domain_error);
    CHECK_THROWS_AS(frac_binom(2, -0.5), std::domain_error);
}

TEST_CASE("frac_binom symmetry and Pascal consistency") {
    mahler::rng::Stream s(7, 0);
    for (int k = 0; k < 100; ++k) {
        double x = 1.0 + 30.0 * s.uniform();
        double y = x * s.uniform();
        CHECK(frac_binom(x, y) == Catch::Approx(frac_binom(x, x - y)).epsilon(1e-10));
    }
    for (int n = 1; n <= 20; ++n)
        for (int k = 1; k < n; ++k) {
            double lhs = frac_binom(n, k);
            double rhs = frac_binom(n - 1, k - 1) + frac_binom(n - 1, k);
            CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
        }
}

TEST_CASE("ball_volume low dimensions and recurrence") {
    CHECK(ball_volume(0) == 1.0);
    CHECK(ball_volume(1) == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(ball_volume(2) == Catch::Approx(3.14159265358979324).epsilon(1e-13));
    CHECK(ball_volume(3) == Catch::Approx(4.18879020478639098).epsilon(1e-13));
    CHECK(ball_volume(4) == Catch::Approx(4.93480220054467931).epsilon(1e-13));
    for (int n = 3; n <= 30; ++n) {
        double rhs = ball_volume(n - 2) * 2.0 * 3.14159265358979324 / n;
        CHECK(ball_volume(n) == Catch::Approx(rhs).epsilon(1e-12));
    }
    for (int n = 1; n <= 50; ++n)
        CHECK(log_ball_volume(n) == Catch::Approx(std::log(ball_volume(n))).margin(1e-12));
}

TEST_CASE("cholesky factors SPD matrices and rejects indefinite ones") {
    Mat m = make_mat({{4, 2}, {2, 3}});
    auto l = cholesky(m);
    REQUIRE(l.has_value());
    Mat rec = *l * l->transposed();
    CHECK(max_abs_diff(rec, m) < 1e-12);
    CHECK(chol_logdet(*l) == Catch::Approx(std::log(8.0)).epsilon(1e-12));

    CHECK_FALSE(cholesky(make_mat({{1, 2}, {2, 1}})).has_value());
    CHECK_FALSE(cholesky(make_mat({{0, 0}, {0, 1}})).has_value());

    for (int n = 1; n <= 8; ++n) {
        Mat spd = random_spd(n, 100 + n);
        auto lf = cholesky(spd);
        REQUIRE(lf.has_value());
        CHECK(max_abs_diff(*lf * lf->transposed(), spd) < 1e-10 * frobenius_norm(spd));
        Mat inv = spd_inverse(spd);
        CHECK(max_abs_diff(inv * spd, Mat::identity(n)) < 1e-9);
    }
}

TEST_CASE("jacobi_eigen small exact case") {
    auto e = jacobi_eigen(make_mat({{2, 1}, {1, 2}}));
    std::vector<double> vals = e.values;
    std::sort(vals.begin(), vals.end());
    CHECK(vals[0] == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(vals[1] == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("jacobi_eigen reconstructs random symmetric matrices") {
    for (int n = 2; n <= 8; ++n) {
        Mat m = random_spd(n, 300 + n, 0.25);
        auto e = jacobi_eigen(m);
        // orthogonality
        CHECK(max_abs_diff(e.vectors.transposed() * e.vectors, Mat::identity(n)) < 1e-10);
        // reconstruction
        Mat d(n, n);
        for (int i = 0; i < n; ++i) d(i, i) = e.values[i];
        Mat rec = e.vectors * d * e.vectors.transposed();
        CHECK(max_abs_diff(rec, m) < 1e-10 * std::max(1.0, frobenius_norm(m)));
    }
}

TEST_CASE("matrix_geometric_mean on commuting pairs") {
    int n = 3;
    Mat m = 0.5 * Mat::identity(n);
    Mat nn = 100.0 * Mat::identity(n);
    Mat q = matrix_geometric_mean(m, nn);
    // sqrt(50) = 7.07106781186547524
    for (int i = 0; i < n; ++i)
        CHECK(q(i, i) == Catch::Approx(7.07106781186547524).epsilon(1e-12));
    CHECK(max_abs_diff(q, q.transposed()) < 1e-12);

    Mat a = make_mat({{1, 0}, {0, 4}});
    Mat b = make_mat({{9, 0}, {0, 1}});
    Mat g = matrix_geometric_mean(a, b);
    CHECK(g(0, 0) == Catch::Approx(3.0).epsilon(1e-12));
    CHECK(g(1, 1) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(g(0, 1)) < 1e-12);
}

TEST_CASE("matrix_geometric_mean solves Q M^-1 Q = N") {
    for (int n = 2; n <= 6; ++n) {
        Mat m = random_spd(n, 500 + n);
        Mat nn = random_spd(n, 900 + n);
        Mat q = matrix_geometric_mean(m, nn);
        Mat resid = q * spd_inverse(m) * q - nn;
        CHECK(frobenius_norm(resid) <= 1e-10 * frobenius_norm(nn));
        // symmetry of the operation in its arguments
        Mat q2 = matrix_geometric_mean(nn, m);
        CHECK(max_abs_diff(q, q2) < 1e-9 * frobenius_norm(q));
        // idempotent case
        Mat qm = matrix_geometric_mean(m, m);
        CHECK(max_abs_diff(qm, m) < 1e-10 * frobenius_norm(m));
        // determinant identity det Q = sqrt(det M det N)
        double ld_q = chol_logdet(*cholesky(q));
        double ld_m = chol_logdet(*cholesky(m));
        double ld_n = chol_logdet(*cholesky(nn));
        CHECK(ld_q == Catch::Approx(0.5 * (ld_m + ld_n)).margin(1e-9));
    }
}

TEST_CASE("lp_solve handles the basic one-variable cases") {
    LpProblem p;
    p.objective = {1.0};
    p.constraints = {{{1.0}, 1.0}, {{-1.0}, 1.0}};
    auto r = lp_solve(p);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.value == Catch::Approx(1.0).margin(1e-9));

    LpProblem inf;
    inf.objective = {0.0};
    inf.constraints = {{{1.0}, -1.0}, {{-1.0}, -2.0}};  // x <= -1 and x >= 2
    CHECK(lp_solve(inf).status == LpStatus::infeasible);

    LpProblem unb;
    unb.objective = {1.0};
    unb.constraints = {{{-1.0}, 0.0}};  // x >= 0, maximize x
    CHECK(lp_solve(unb).status == LpStatus::unbounded);
}

TEST_CASE("lp_solve enforces size caps") {
    LpProblem p;
    p.objective.assign(65, 1.0);
    p.constraints.push_back({Vec(65, 1.0), 1.0});
    CHECK_THROWS_AS(lp_solve(p), std::invalid_argument);
}

TEST_CASE("lp_solve matches vertex enumeration on random bounded instances") {
    mahler::rng::Stream s(2024, 3);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 1 + static_cast<int>(s.uniform() * 5.0);
        LpProblem p;
        p.objective.resize(n);
        for (double& c : p.objective) c = 2.0 * s.uniform() - 1.0;
        // Box to guarantee boundedness; 0 is feasible for every row.
        for (int i = 0; i < n; ++i) {
            Vec e(n, 0.0);
            e[i] = 1.0;
            p.constraints.push_back({e, 2.0});
            Vec ne(n, 0.0);
            ne[i] = -1.0;
            p.constraints.push_back({ne, 2.0});
        }
        int extra = 1 + static_cast<int>(s.uniform() * 8.0);
        for (int k = 0; k < extra; ++k) {
            Vec a(n);
            for (double& v : a) v = 2.0 * s.uniform() - 1.0;
            p.constraints.push_back({a, 0.25 + s.uniform()});
        }
        auto got = lp_solve(p);
        REQUIRE(got.status == LpStatus::optimal);
        auto want = oracle::lp_by_vertex_enumeration(p);
        REQUIRE(want.has_value());
        CHECK(got.value == Catch::Approx(*want).margin(1e-8));
        // solver's reported point must be feasible
        for (const auto& c : p.constraints)
            CHECK(dot(c.a, got.x) <= c.b + 1e-8);
    }
}

TEST_CASE("lu_factor inverts and computes determinants") {
    Mat m = make_mat({{2, 1, 0}, {1, 3, 1}, {0, 1, 2}});
    auto f = lu_factor(m);
    REQUIRE(f.has_value());
    CHECK(f->det == Catch::Approx(8.0).epsilon(1e-12));
    CHECK(max_abs_diff(lu_inverse(*f) * m, Mat::identity(3)) < 1e-12);
    CHECK_FALSE(lu_factor(make_mat({{1, 2}, {2, 4}})).has_value());
}

TEST_CASE("stream rng is deterministic and counter-splittable") {
    mahler::rng::Stream a(123, 5), b(123, 5), c(123, 6);
    bool same = true, differ = false;
    for (int i = 0; i < 64; ++i) {
        auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
        same = same && (x == y);
        differ = differ || (x != z);
    }
    CHECK(same);
    CHECK(differ);

    mahler::rng::Stream s(9, 1);
    double mean = 0.0;
    int n = 20000;
    for (int i = 0; i < n; ++i) mean += s.uniform();
    mean /= n;
    CHECK(std::abs(mean - 0.5) < 0.01);

    Vec v(4);
    mahler::rng::Stream sv(9, 2);
    sv.unit_vector(v);
    CHECK(norm2(v) == Catch::Approx(1.0).epsilon(1e-12));
}
