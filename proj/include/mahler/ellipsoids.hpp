#pragma once

// Ellipsoid machinery: minimum-volume enclosing ellipsoids of symmetric
// point sets (Khachiyan's barycentric ascent with Wolfe-Atwood away steps),
// Loewner ellipsoids of bodies, John ellipsoids by polarity, interpolating
// ellipsoids through the matrix geometric mean, and verified inner/outer
// sandwich certificates.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "ops.hpp"

namespace mahler {

// ---------------------------------------------------------------------------
// Minimum-volume ellipsoid of {+/- p_i}. The D-optimal design weights u
// maximize logdet of Lambda(u) = sum u_i p_i p_iT; at the optimum the
// ellipsoid {x : xT Lambda^-1 x <= n} is the Loewner ellipsoid of the point
// set. kappa_i = p_iT Lambda^-1 p_i drives both step types: a Frank-Wolfe
// step grows the weight of the worst outlier, an away step drains weight
// from an over-covered support point. The final form is rescaled by the
// largest kappa so containment of every input point is exact.

struct MveeResult {
    Ellipsoid ellipsoid;
    int iterations = 0;
    bool converged = false;
    double slack = 0.0;  // max kappa/n - 1 at exit, before the rescale
};

inline MveeResult mvee_symmetric(const Mat& points, double eps = 1e-7,
                                 int max_iters = 100000) {
    int m = points.rows, n = points.cols;
    if (m < 1 || n < 1) throw std::invalid_argument("mvee: empty point set");

    Vec u(m, 1.0 / m);
    Mat lambda(n, n);
    auto rebuild = [&]() {
        lambda = Mat(n, n);
        for (int i = 0; i < m; ++i)
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) lambda(r, c) += u[i] * points(i, r) * points(i, c);
    };
    rebuild();
    auto chol = num::cholesky(lambda);
    if (!chol) throw std::invalid_argument("mvee: points do not span the space");
    Mat inv = num::spd_inverse_from_chol(*chol);

    Vec kappa(m), w(n);
    auto sm_update = [&](int idx, double coef) {
        // (Lambda + coef p pT)^-1 by Sherman-Morrison on the running inverse
        auto p = points.row(idx);
        for (int r = 0; r < n; ++r) w[r] = num::dot(inv.row(r), p);
        double denom = 1.0 + coef * num::dot(std::span<const double>(w), p);
        if (std::abs(denom) < 1e-12) return false;
        double scale = coef / denom;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) inv(r, c) -= scale * w[r] * w[c];
        return true;
    };

    MveeResult out{Ellipsoid(Mat::identity(n)), 0, false, 0.0};
    int it = 0;
    for (; it < max_iters; ++it) {
        if (it % 256 == 255) {
            rebuild();
            inv = num::spd_inverse(lambda);
        }
        int hi = 0, lo = -1;
        double khi = -1.0, klo = 0.0;
        for (int i = 0; i < m; ++i) {
            kappa[i] = num::quad_form(inv, points.row(i));
            if (kappa[i] > khi) {
                khi = kappa[i];
                hi = i;
            }
            if (u[i] > 1e-12 && (lo < 0 || kappa[i] < klo)) {
                klo = kappa[i];
                lo = i;
            }
        }
        double up = khi / n - 1.0;
        double down = lo >= 0 ? 1.0 - klo / n : 0.0;
        out.slack = up;
        if (up <= eps && down <= eps) {
            out.converged = true;
            break;
        }

        if (up >= down) {
            double beta = (khi - n) / (n * (khi - 1.0));
            for (double& v : u) v *= 1.0 - beta;
            u[hi] += beta;
            double c = beta / (1.0 - beta);  // Lambda_new = (1-beta)(Lambda + c p pT)
            bool ok = sm_update(hi, c);
            double s = 1.0 / (1.0 - beta);
            if (ok)
                for (double& v : inv.a) v *= s;
            else {
                rebuild();
                inv = num::spd_inverse(lambda);
            }
        } else {
            double beta = (n - klo) / (n * (klo - 1.0));
            beta = std::min(beta, u[lo] / (1.0 - u[lo]));
            for (double& v : u) v *= 1.0 + beta;
            u[lo] -= beta;
            if (u[lo] < 1e-15) u[lo] = 0.0;
            double c = -beta / (1.0 + beta);
            bool ok = sm_update(lo, c);
            double s = 1.0 / (1.0 + beta);
            if (ok)
                for (double& v : inv.a) v *= s;
            else {
                rebuild();
                inv = num::spd_inverse(lambda);
            }
        }
    }
    out.iterations = it;

    // exact containment: scale so the worst point sits on the boundary
    rebuild();
    inv = num::spd_inverse(lambda);
    double kmax = 0.0;
    for (int i = 0; i < m; ++i) kmax = std::max(kmax, num::quad_form(inv, points.row(i)));
    double denom = std::max(static_cast<double>(n), kmax);
    Mat form = (1.0 / denom) * inv;
    out.ellipsoid = Ellipsoid(std::move(form));
    return out;
}

// ---------------------------------------------------------------------------
// Containment diagnostics against sampled directions.

namespace detail {

// Local polish of a direction-dependent ratio, maximizing along tangent
// arcs by golden-section. Gauge kinks put narrow peaks in these landscapes
// that sit between random probe directions; starting from the worst probe
// and sliding into the peak recovers them. Every evaluation is an achieved
// ratio, so the result is still a lower bound on the true maximum.
template <class Fn>
double polish_direction_max(int dim, Fn&& f, Vec& d, double fd, std::uint64_t seed) {
    constexpr double kGolden = 0.6180339887498949;
    rng::Stream rs(seed, 3);
    Vec w(dim), cand(dim);
    auto arc = [&](double phi) {
        double c = std::cos(phi), s = std::sin(phi);
        for (int i = 0; i < dim; ++i) cand[i] = c * d[i] + s * w[i];
        return f(cand);
    };
    for (int sweep = 0; sweep < 8; ++sweep) {
        double f_before = fd;
        for (int mv = 0; mv < dim + 2; ++mv) {
            if (mv < dim) {
                std::fill(w.begin(), w.end(), 0.0);
                w[mv] = 1.0;
            } else {
                rs.unit_vector(w);
            }
            double proj = num::dot(w, d);
            for (int i = 0; i < dim; ++i) w[i] -= proj * d[i];
            double wn = num::norm2(w);
            if (wn < 1e-12) continue;
            for (int i = 0; i < dim; ++i) w[i] /= wn;
            double a = -0.15, b = 0.15;
            double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
            double f1 = arc(x1), f2 = arc(x2);
            while (b - a > 1e-11) {
                if (f1 < f2) {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + kGolden * (b - a);
                    f2 = arc(x2);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - kGolden * (b - a);
                    f1 = arc(x1);
                }
            }
            double phi = f1 >= f2 ? x1 : x2;
            double fc = std::max(f1, f2);
            if (fc > fd) {
                double c = std::cos(phi), s = std::sin(phi);
                for (int i = 0; i < dim; ++i) d[i] = c * d[i] + s * w[i];
                fd = fc;
            }
        }
        if (fd - f_before <= 1e-13 * std::max(1.0, fd)) break;
    }
    return fd;
}

// max gauge_K over boundary points of E: > 1 means E sticks out of K.
// By homogeneity that is max over directions of gauge_K(u) / gauge_E(u).
inline double max_gauge_on_boundary(const Body& k, const Ellipsoid& e, int dirs,
                                    std::uint64_t seed) {
    auto ds = rng::unit_directions(e.dim(), dirs, seed);
    auto ratio = [&](std::span<const double> u) {
        double ge = e.gauge(u);
        double gk = k.gauge(u);
        return ge > 0.0 && std::isfinite(gk) ? gk / ge : 0.0;
    };
    double worst = 0.0;
    Vec arg;
    for (const auto& u : ds) {
        double v = ratio(u);
        if (v > worst) {
            worst = v;
            arg = u;
        }
    }
    if (!arg.empty())
        worst = polish_direction_max(e.dim(), ratio, arg, worst, rng::mix64(seed ^ 0x70ull));
    return worst;
}

struct SupportRatioCheck {
    double worst = 0.0;
    Vec dir;
};

// max h_K(u) / h_E(u): > 1 means K sticks out of E
inline SupportRatioCheck max_support_ratio(const Body& k, const Ellipsoid& e, int dirs,
                                           std::uint64_t seed) {
    auto ds = rng::unit_directions(e.dim(), dirs, seed);
    auto ratio = [&](std::span<const double> u) {
        double he = e.support(u);
        double hk = k.support(u);
        return he > 0.0 && std::isfinite(hk) ? hk / he : 0.0;
    };
    SupportRatioCheck out;
    for (const auto& u : ds) {
        double v = ratio(u);
        if (v > out.worst) {
            out.worst = v;
            out.dir = Vec(u.begin(), u.end());
        }
    }
    if (!out.dir.empty())
        out.worst =
            polish_direction_max(e.dim(), ratio, out.dir, out.worst, rng::mix64(seed ^ 0x72ull));
    return out;
}

// max g_E(u) / g_K(u): > 1 means K sticks out of E (gauge-side test of K in E)
inline double max_envelope_gauge_ratio(const Body& k, const Ellipsoid& e, int dirs,
                                       std::uint64_t seed) {
    auto ds = rng::unit_directions(e.dim(), dirs, seed);
    auto ratio = [&](std::span<const double> u) {
        double gk = k.gauge(u);
        return gk > 0.0 && std::isfinite(gk) ? e.gauge(u) / gk : 0.0;
    };
    double worst = 0.0;
    Vec arg;
    for (const auto& u : ds) {
        double v = ratio(u);
        if (v > worst) {
            worst = v;
            arg = u;
        }
    }
    if (!arg.empty())
        worst = polish_direction_max(e.dim(), ratio, arg, worst, rng::mix64(seed ^ 0x74ull));
    return worst;
}

// max g_E(u) / g_K(u) with E an arbitrary body gauge; used for body-in-body
// inclusion checks where both gauges are cheap
template <class GaugeA, class GaugeB>
double max_gauge_quotient(int dim, GaugeA&& num_gauge, GaugeB&& den_gauge, int dirs,
                          std::uint64_t seed) {
    auto ds = rng::unit_directions(dim, dirs, seed);
    auto ratio = [&](std::span<const double> u) {
        double den = den_gauge(u);
        double num = num_gauge(u);
        return den > 0.0 && std::isfinite(num) ? num / den : 0.0;
    };
    double worst = 0.0;
    Vec arg;
    for (const auto& u : ds) {
        double v = ratio(u);
        if (v > worst) {
            worst = v;
            arg = u;
        }
    }
    if (!arg.empty())
        worst = polish_direction_max(dim, ratio, arg, worst, rng::mix64(seed ^ 0x76ull));
    return worst;
}

inline Mat block_diag(const Mat& a, const Mat& b) {
    Mat m(a.rows + b.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) m(i, j) = a(i, j);
    for (int i = 0; i < b.rows; ++i)
        for (int j = 0; j < b.cols; ++j) m(a.rows + i, a.cols + j) = b(i, j);
    return m;
}

inline std::string format_direction(const Vec& d) {
    std::string s = "(";
    char buf[32];
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6g", d[i]);
        s += buf;
        if (i + 1 < d.size()) s += ", ";
    }
    s += ")";
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loewner ellipsoid (minimum-volume enclosing ellipsoid) of a body. Exact
// closed forms where the structure allows; otherwise the enclosing ellipsoid
// of sampled boundary points, inflated by the measured worst violation so
// the result still encloses the sampled geometry with a safety margin.

struct LoewnerResult {
    Ellipsoid ellipsoid;
    double inflation = 1.0;  // (sampled path) factor applied on top of the mvee
    bool sampled = false;
};

inline LoewnerResult loewner(const SymBody& k, int boundary_samples = 512,
                             std::uint64_t seed = 0x4c6f65776eull);

namespace detail {

inline LoewnerResult loewner_sampled(const SymBody& k, int samples, std::uint64_t seed) {
    int n = k.dim();
    auto dirs = rng::unit_directions(n, samples, seed);
    Mat pts(static_cast<int>(dirs.size()), n);
    int r = 0;
    for (const auto& u : dirs) {
        double g = k.gauge(u);
        if (!(g > 0.0) || !std::isfinite(g))
            throw std::runtime_error("loewner: gauge not positive on a sample direction");
        for (int i = 0; i < n; ++i) pts(r, i) = u[i] / g;
        ++r;
    }
    auto mv = mvee_symmetric(pts);

    // fresh directions probe how much of the body the sampled hull missed;
    // the worst few probes get polished into their local violation peaks
    auto ratio = [&](std::span<const double> u) {
        double g = k.gauge(u);
        return g > 0.0 && std::isfinite(g) ? mv.ellipsoid.gauge(u) / g : 0.0;
    };
    auto probe = rng::unit_directions(n, 4 * samples, rng::mix64(seed ^ 0x9e37ull));
    std::vector<double> vals(probe.size());
    std::vector<int> order(probe.size());
    for (std::size_t i = 0; i < probe.size(); ++i) {
        vals[i] = ratio(probe[i]);
        order[i] = static_cast<int>(i);
    }
    int polish = std::min<int>(8, static_cast<int>(order.size()));
    std::partial_sort(order.begin(), order.begin() + polish, order.end(),
                      [&](int a, int b) { return vals[a] > vals[b]; });
    double viol = 1.0;
    for (int s = 0; s < polish; ++s) {
        Vec d = probe[order[s]];
        viol = std::max(viol, polish_direction_max(n, ratio, d, vals[order[s]],
                                                   rng::mix64(seed ^ (0xb0bull + s))));
    }
    double inflate = viol * (1.0 + 1e-6);
    return {mv.ellipsoid.scaled(inflate), inflate, true};
}

}  // namespace detail

inline LoewnerResult loewner(const SymBody& k, int boundary_samples, std::uint64_t seed) {
    switch (k.kind()) {
        case BodyKind::ellipsoid:
            return {static_cast<const EllipsoidBody&>(k.node()).ell, 1.0, false};
        case BodyKind::lp_ball: {
            // circumradius of the unit lp ball is n^(1/2 - 1/p) for p >= 2
            // (attained at the diagonal) and 1 for p <= 2 (at the axes)
            const auto& b = static_cast<const LpBallBody&>(k.node());
            double inv_p = b.pe.inf ? 0.0 : 1.0 / b.pe.p;
            double radius = std::pow(k.dim(), std::max(0.0, 0.5 - inv_p));
            Mat form = (1.0 / (radius * radius)) * Mat::identity(k.dim());
            return {Ellipsoid(std::move(form)), 1.0, false};
        }
        case BodyKind::polytope: {
            const auto& p = static_cast<const PolytopeBody&>(k.node());
            if (p.vertices) {
                auto mv = mvee_symmetric(*p.vertices);
                return {mv.ellipsoid, 1.0, false};
            }
            if (k.dim() == 2) {
                auto corners = p.planar_corners();
                Mat pts(static_cast<int>(corners.size()), 2);
                for (std::size_t i = 0; i < corners.size(); ++i) {
                    pts(static_cast<int>(i), 0) = corners[i][0];
                    pts(static_cast<int>(i), 1) = corners[i][1];
                }
                return {mvee_symmetric(pts).ellipsoid, 1.0, false};
            }
            return detail::loewner_sampled(k, boundary_samples, seed);
        }
        case BodyKind::linear_map: {
            const auto& m = static_cast<const LinearMapBody&>(k.node());
            auto inner = loewner(SymBody(m.inner), boundary_samples, seed);
            Mat f = m.map_inv.transposed() * (inner.ellipsoid.form() * m.map_inv);
            return {Ellipsoid(std::move(f)), inner.inflation, inner.sampled};
        }
        case BodyKind::cap: {
            // the intersection sits inside both children
            const auto& c = static_cast<const CapBody&>(k.node());
            auto la = loewner(SymBody(c.a), boundary_samples, seed);
            auto lb = loewner(SymBody(c.b), boundary_samples, seed);
            bool a_smaller = la.ellipsoid.log_volume() <= lb.ellipsoid.log_volume();
            return a_smaller ? la : lb;
        }
        case BodyKind::sum: {
            // h_{A + B} at u is at most c * sqrt(uT (Ma^-1 + Mb^-1) u) with
            // c = 1 for p <= 2 and c^2 = 2^(1 - 2/p) otherwise, so that
            // quadratic form (scaled) gives an enclosing ellipsoid
            const auto& s = static_cast<const SumBody&>(k.node());
            auto la = loewner(SymBody(s.a), boundary_samples, seed);
            auto lb = loewner(SymBody(s.b), boundary_samples, seed);
            double c2;
            if (s.pe.inf)
                c2 = 2.0;
            else if (s.pe.p <= 2.0)
                c2 = 1.0;
            else
                c2 = std::pow(2.0, 1.0 - 2.0 / s.pe.p);
            Mat inv_sum = la.ellipsoid.form_inv() + lb.ellipsoid.form_inv();
            Mat form = (1.0 / c2) * num::spd_inverse(inv_sum);
            return {Ellipsoid(std::move(form)), std::max(la.inflation, lb.inflation),
                    la.sampled || lb.sampled};
        }
        case BodyKind::prod: {
            // gauge_p dominates the scaled 2-combination, so the block form
            // divided by s encloses the product; s = 1 for p <= 2
            const auto& pr = static_cast<const ProdBody&>(k.node());
            auto la = loewner(SymBody(pr.a), boundary_samples, seed);
            auto lb = loewner(SymBody(pr.b), boundary_samples, seed);
            double s;
            if (pr.pe.inf)
                s = 2.0;
            else if (pr.pe.p <= 2.0)
                s = 1.0;
            else
                s = std::pow(2.0, 1.0 - 2.0 / pr.pe.p);
            Mat form = (1.0 / s) *
                       detail::block_diag(la.ellipsoid.form(), lb.ellipsoid.form());
            return {Ellipsoid(std::move(form)), std::max(la.inflation, lb.inflation),
                    la.sampled || lb.sampled};
        }
        default:
            return detail::loewner_sampled(k, boundary_samples, seed);
    }
}

// ---------------------------------------------------------------------------
// John ellipsoid (maximum-volume inscribed) by polarity: the John ellipsoid
// of K is the polar of the Loewner ellipsoid of K polar. When the Loewner
// side is sampled the polar can poke out of K slightly, so the result is
// deflated by the worst measured gauge violation.

struct JohnResult {
    Ellipsoid ellipsoid;
    double deflation = 1.0;
    bool sampled = false;
};

inline JohnResult john(const SymBody& k, int check_dirs = 1000,
                       std::uint64_t seed = 0x4a6f686eull) {
    auto lw = loewner(polar(k), 512, seed);
    Ellipsoid j = lw.ellipsoid.polar();
    double worst = detail::max_gauge_on_boundary(k.node(), j, check_dirs,
                                                 rng::mix64(seed ^ 0x11ull));
    JohnResult out{j, 1.0, lw.sampled};
    if (worst > 1.0) {
        out.deflation = worst * (1.0 + 1e-12);
        out.ellipsoid = j.scaled(1.0 / out.deflation);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inner/outer ellipsoid pair certified against the body on sampled
// directions. ratio is the per-dimension volume ratio (Vol E2 / Vol E1)^(1/n).

struct SandwichCertificate {
    Ellipsoid inner;
    Ellipsoid outer;
    double ratio = 1.0;
};

inline SandwichCertificate make_sandwich_certificate(const SymBody& k, Ellipsoid inner,
                                                     Ellipsoid outer, int check_dirs = 1000,
                                                     double tol = 1e-7,
                                                     std::uint64_t seed = 0x53616e64ull) {
    int n = k.dim();
    if (inner.dim() != n || outer.dim() != n)
        throw std::invalid_argument("sandwich: dimension mismatch");

    // nested forms: inner form must dominate the outer form
    Mat diff = inner.form() + (-1.0 * outer.form());
    auto eig = num::jacobi_eigen(diff);
    double lo = eig.values[0];
    for (double v : eig.values) lo = std::min(lo, v);
    if (lo < -1e-9 * num::frobenius_norm(inner.form()))
        throw std::invalid_argument("sandwich: ellipsoids are not nested");

    double g = detail::max_gauge_on_boundary(k.node(), inner, check_dirs, seed);
    if (g > 1.0 + tol)
        throw std::invalid_argument(
            "sandwich: inner ellipsoid leaves the body (worst gauge " + std::to_string(g) + ")");
    auto sr = detail::max_support_ratio(k.node(), outer, check_dirs, rng::mix64(seed ^ 0x77ull));
    if (sr.worst > 1.0 + tol)
        throw std::invalid_argument("sandwich: body leaves the outer ellipsoid at direction " +
                                    detail::format_direction(sr.dir) + " (ratio " +
                                    std::to_string(sr.worst) + ")");

    SandwichCertificate cert{std::move(inner), std::move(outer), 1.0};
    cert.ratio = std::exp((cert.outer.log_volume() - cert.inner.log_volume()) / n);
    return cert;
}

// John pair: inscribed ellipsoid and its sqrt(n) dilate, which covers any
// symmetric body by John's theorem. The cover is re-verified on sampled
// directions; a violation beyond tol reports the offending direction.
inline SandwichCertificate john_sandwich(const SymBody& k, int check_dirs = 1000,
                                         double tol = 1e-7,
                                         std::uint64_t seed = 0x4a53616eull) {
    int n = k.dim();
    auto j = john(k, check_dirs, seed);
    Ellipsoid outer = j.ellipsoid.scaled(std::sqrt(static_cast<double>(n)));
    auto sr = detail::max_support_ratio(k.node(), outer, check_dirs, rng::mix64(seed ^ 0x55ull));
    if (sr.worst > 1.0 + tol)
        throw std::runtime_error("john_sandwich: sqrt(n) cover fails at direction " +
                                 detail::format_direction(sr.dir) + " (ratio " +
                                 std::to_string(sr.worst) + ")");
    if (sr.worst > 1.0) outer = outer.scaled(sr.worst * (1.0 + 1e-12));
    return make_sandwich_certificate(k, j.ellipsoid, std::move(outer), check_dirs, tol,
                                     rng::mix64(seed ^ 0x99ull));
}

// ---------------------------------------------------------------------------
// The interpolating ellipsoid of a nested pair: its form is the geometric
// mean Q of the two forms, so Q Mout^-1 Q = Min and Q Min^-1 Q = Mout, and
// its volume is the geometric mean of the two volumes.

inline Ellipsoid interpolating_ellipsoid(const Ellipsoid& inner, const Ellipsoid& outer) {
    if (inner.dim() != outer.dim())
        throw std::invalid_argument("interpolating_ellipsoid: dimension mismatch");
    Mat diff = inner.form() + (-1.0 * outer.form());
    auto eig = num::jacobi_eigen(diff);
    double lo = eig.values[0];
    for (double v : eig.values) lo = std::min(lo, v);
    if (lo < -1e-9 * num::frobenius_norm(inner.form()))
        throw std::invalid_argument("interpolating_ellipsoid: pair is not nested");

    Mat q = num::matrix_geometric_mean(inner.form(), outer.form());
    // consistency of the mean equation, relative to the outer form
    Mat lhs = q * (inner.form_inv() * q);
    double resid = num::max_abs_diff(lhs, outer.form());
    if (resid > 1e-10 * std::max(1.0, num::frobenius_norm(outer.form())))
        throw std::runtime_error("interpolating_ellipsoid: geometric mean residual too large");
    return Ellipsoid(std::move(q));
}

}  // namespace mahler
