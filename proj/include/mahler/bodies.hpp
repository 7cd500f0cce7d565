#pragma once

// Origin-symmetric convex bodies as immutable oracle trees. Every body
// exposes a gauge (Minkowski functional) and a support function; each oracle
// is tagged exact or numeric, and the tags propagate through composites.
// Bodies are full-dimensional by construction: degenerate inputs are
// rejected so gauges stay finite away from zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "numkernel.hpp"
#include "rng.hpp"

namespace mahler {

using num::Mat;
using num::Vec;

// ---------------------------------------------------------------------------
// Exponents for the p-family of body operations.

struct PExponent {
    double p = 2.0;
    bool inf = false;

    static PExponent of(double value) {
        if (std::isinf(value)) return {std::numeric_limits<double>::infinity(), true};
        if (!(value >= 1.0) || std::isnan(value))
            throw std::domain_error("PExponent: p must lie in [1, inf]");
        return {value, false};
    }

    PExponent conjugate() const {
        if (inf) return {1.0, false};
        if (p == 1.0) return {std::numeric_limits<double>::infinity(), true};
        return {p / (p - 1.0), false};
    }
};

// (|a|^p + |b|^p)^(1/p), scaled to dodge overflow, with the max-combination
// at p = inf.
inline double p_combine(const PExponent& pe, double a, double b) {
    a = std::abs(a);
    b = std::abs(b);
    if (pe.inf) return std::max(a, b);
    if (pe.p == 1.0) return a + b;
    if (pe.p == 2.0) return std::sqrt(a * a + b * b);
    double m = std::max(a, b);
    if (m == 0.0) return 0.0;
    double s = std::pow(a / m, pe.p) + std::pow(b / m, pe.p);
    return m * std::pow(s, 1.0 / pe.p);
}

inline double lp_norm(std::span<const double> x, const PExponent& pe) {
    if (pe.inf) {
        double m = 0.0;
        for (double v : x) m = std::max(m, std::abs(v));
        return m;
    }
    if (pe.p == 1.0) {
        double s = 0.0;
        for (double v : x) s += std::abs(v);
        return s;
    }
    if (pe.p == 2.0) return num::norm2(x);
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v) / m, pe.p);
    return m * std::pow(s, 1.0 / pe.p);
}

namespace detail {

// log volume of the unit lp ball: (2 Gamma(1 + 1/p))^n / Gamma(1 + n/p).
inline double lp_ball_log_volume(const PExponent& pe, int n) {
    double inv_p = pe.inf ? 0.0 : 1.0 / pe.p;
    return n * (std::numbers::ln2 + num::log_gamma(1.0 + inv_p)) -
           num::log_gamma(1.0 + n * inv_p);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ellipsoids {x : xT M x <= 1}, kept with their cached factorizations.

class Ellipsoid {
  public:
    explicit Ellipsoid(Mat form) {
        if (form.rows != form.cols || form.rows < 1)
            throw std::invalid_argument("Ellipsoid: form must be square");
        if (!num::is_symmetric(form, 1e-9))
            throw std::invalid_argument("Ellipsoid: form must be symmetric");
        form_ = num::symmetrized(form);
        auto l = num::cholesky(form_);
        if (!l) throw std::invalid_argument("Ellipsoid: form must be positive definite");
        chol_ = *l;
        logdet_ = num::chol_logdet(chol_);
        inv_ = num::spd_inverse_from_chol(chol_);
    }

    int dim() const { return form_.rows; }
    const Mat& form() const { return form_; }
    const Mat& form_inv() const { return inv_; }
    const Mat& chol_lower() const { return chol_; }
    double logdet_form() const { return logdet_; }

    double gauge(std::span<const double> x) const {
        return std::sqrt(std::max(0.0, num::quad_form(form_, x)));
    }
    double support(std::span<const double> y) const {
        return std::sqrt(std::max(0.0, num::quad_form(inv_, y)));
    }

    double log_volume() const { return num::log_ball_volume(dim()) - 0.5 * logdet_; }
    double volume() const { return std::exp(log_volume()); }

    // Exact involution: swaps the cached form and inverse.
    Ellipsoid polar() const {
        Ellipsoid e = *this;
        std::swap(e.form_, e.inv_);
        e.chol_ = *num::cholesky(e.form_);
        e.logdet_ = -logdet_;
        return e;
    }

    // The body t * E (pointwise scaling), i.e. form M / t^2.
    Ellipsoid scaled(double t) const {
        if (!(t > 0.0)) throw std::invalid_argument("Ellipsoid::scaled: t must be positive");
        return Ellipsoid((1.0 / (t * t)) * form_);
    }

  private:
    Mat form_, inv_, chol_;
    double logdet_ = 0.0;
};

// ---------------------------------------------------------------------------
// Body oracle tree.

enum class BodyKind { ellipsoid, polytope, lp_ball, polar, cap, sum, prod, linear_map };

struct Body;
using BodyPtr = std::shared_ptr<const Body>;

struct Body {
    BodyKind kind;
    int dim = 0;
    bool gauge_exact = true;
    bool support_exact = true;
    std::optional<double> exact_vol;

    explicit Body(BodyKind k) : kind(k) {}
    virtual ~Body() = default;

    virtual double gauge(std::span<const double> x) const = 0;
    virtual double support(std::span<const double> y) const = 0;
    virtual bool contains(std::span<const double> x) const { return gauge(x) <= 1.0; }
};

// Value handle for bodies; cheap to copy, immutable underneath.
class SymBody {
  public:
    SymBody() = default;
    explicit SymBody(BodyPtr node) : node_(std::move(node)) {}

    const Body& node() const { return *node_; }
    const BodyPtr& ptr() const { return node_; }
    bool valid() const { return static_cast<bool>(node_); }

    int dim() const { return node_->dim; }
    BodyKind kind() const { return node_->kind; }
    double gauge(std::span<const double> x) const { return node_->gauge(x); }
    double support(std::span<const double> y) const { return node_->support(y); }
    bool contains(std::span<const double> x) const { return node_->contains(x); }
    bool gauge_exact() const { return node_->gauge_exact; }
    bool support_exact() const { return node_->support_exact; }
    std::optional<double> exact_volume() const { return node_->exact_vol; }

  private:
    BodyPtr node_;
};

namespace detail {

// Volume of a symmetric interval is available whenever one oracle is exact.
inline SymBody finish_node(std::shared_ptr<Body> n) {
    if (n->dim == 1 && !n->exact_vol) {
        const double e1[1] = {1.0};
        if (n->gauge_exact) {
            double g = n->gauge(e1);
            if (g > 0.0) n->exact_vol = 2.0 / g;
        } else if (n->support_exact) {
            n->exact_vol = 2.0 * n->support(e1);
        }
    }
    return SymBody(std::move(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Numeric support evaluation. The support of K at y is the maximum of the
// scale-free ratio F(d) = <y, d> / gauge(d) over directions d. F has no
// strict local maxima in the angular domain: if d is suboptimal, points on
// the radial projection of the segment towards a maximizer strictly improve
// F (convexity keeps the segment inside K). So hill climbing with tangential
// moves converges to the global value; tangential moves matter because they
// can slide along flat faces where radial retraction would stall. Every
// evaluation is at a feasible ratio, so the result is a lower bound on the
// true support, which is the conservative side for inequality checking.

struct AscendOptions {
    int starts = 8;
    double tol = 1e-10;
    int max_evals = 4000;  // gauge evaluations per climb
    std::uint64_t seed = 0x6d61686cull;
    double early_exit_above = std::numeric_limits<double>::infinity();
};

struct AscendResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;  // total gauge evaluations
};

template <class GaugeFn>
AscendResult ascend_linear_max(int dim, GaugeFn&& gauge_fn, std::span<const double> y,
                               const AscendOptions& opts = {}) {
    AscendResult out;
    double yn = num::norm2(y);
    if (yn == 0.0) {
        out.converged = true;
        return out;
    }
    if (dim == 1) {
        // the ratio is constant over directions in one dimension
        const double e1[1] = {1.0};
        double g = gauge_fn(e1);
        out.iterations = 1;
        if (g > 0.0 && std::isfinite(g)) {
            out.value = std::abs(y[0]) / g;
            out.converged = true;
        }
        return out;
    }

    constexpr double kGolden = 0.6180339887498949;
    rng::Stream rs(opts.seed, 2);
    Vec d(dim), w(dim), cand(dim), start(dim), best_d;
    bool best_settled = false;

    auto arc_value = [&](const Vec& base, const Vec& tangent, double phi) {
        double c = std::cos(phi), s = std::sin(phi);
        for (int i = 0; i < dim; ++i) cand[i] = c * base[i] + s * tangent[i];
        double g = gauge_fn(cand);
        ++out.iterations;
        if (!(g > 1e-300) || !std::isfinite(g)) return -std::numeric_limits<double>::infinity();
        return num::dot(cand, y) / g;
    };

    // maximize over the arc through d in the plane of (d, w); quasiconcave
    // on a sub-half-turn window, so golden-section search applies
    auto line_search = [&](double phi_tol, double* phi_out) {
        double a = -1.25, b = 1.25;
        double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
        double f1 = arc_value(d, w, x1), f2 = arc_value(d, w, x2);
        while (b - a > phi_tol && out.iterations < opts.max_evals * opts.starts * 4) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kGolden * (b - a);
                f2 = arc_value(d, w, x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kGolden * (b - a);
                f1 = arc_value(d, w, x1);
            }
        }
        *phi_out = f1 >= f2 ? x1 : x2;
        return std::max(f1, f2);
    };

    auto climb = [&](const Vec& d0, int eval_budget, double* value_out,
                     bool* settled_out) -> bool {
        double n0 = num::norm2(d0);
        if (!(n0 > 0.0)) return false;
        for (int i = 0; i < dim; ++i) d[i] = d0[i] / n0;
        double g = gauge_fn(d);
        ++out.iterations;
        if (!(g > 0.0) || !std::isfinite(g)) return false;
        double f = num::dot(d, y) / g;
        int used0 = out.iterations;
        int flat = 0;
        bool settled = false;
        // sweep directions: the push along y, every axis, two fresh random
        // tangents; line-search each. Early sweeps use a loose angular
        // tolerance, later sweeps tighten to the floor.
        for (int sweep = 0; sweep < 64; ++sweep) {
            double phi_tol = std::max(1e-10, 1e-2 * std::pow(0.25, sweep));
            double f_before = f;
            for (int mv = 0; mv < dim + 3; ++mv) {
                if (out.iterations - used0 > eval_budget) break;
                if (mv == 0) {
                    for (int i = 0; i < dim; ++i) w[i] = y[i];
                } else if (mv <= dim) {
                    std::fill(w.begin(), w.end(), 0.0);
                    w[mv - 1] = 1.0;
                } else {
                    rs.unit_vector(w);
                }
                double proj = num::dot(w, d);
                for (int i = 0; i < dim; ++i) w[i] -= proj * d[i];
                double wn = num::norm2(w);
                if (wn < 1e-12) continue;
                for (int i = 0; i < dim; ++i) w[i] /= wn;
                double phi = 0.0;
                double fc = line_search(phi_tol, &phi);
                if (fc > f) {
                    double c = std::cos(phi), s = std::sin(phi);
                    for (int i = 0; i < dim; ++i) d[i] = c * d[i] + s * w[i];
                    f = fc;
                    if (f > opts.early_exit_above) {
                        settled = true;
                        break;
                    }
                }
            }
            if (settled || out.iterations - used0 > eval_budget) break;
            if (phi_tol <= 1e-9 && f - f_before < opts.tol * std::abs(f)) {
                if (++flat >= 2) {
                    settled = true;
                    break;
                }
            } else {
                flat = 0;
            }
        }
        *value_out = f;
        *settled_out = settled;
        return true;
    };

    for (int s = 0; s < opts.starts; ++s) {
        if (s == 0) {
            for (int i = 0; i < dim; ++i) start[i] = y[i];
        } else {
            rs.unit_vector(start);
            if (num::dot(start, y) < 0.0)
                for (double& c : start) c = -c;
        }
        double f = 0.0;
        bool settled = false;
        if (!climb(start, opts.max_evals, &f, &settled)) continue;
        if (f > out.value) {
            out.value = f;
            best_d = d;
            best_settled = settled;
        }
        if (out.value > opts.early_exit_above) {
            out.converged = true;
            return out;
        }
    }
    if (!best_d.empty()) {
        // refine the incumbent with a longer budget
        double f = 0.0;
        bool settled = false;
        if (climb(best_d, 2 * opts.max_evals, &f, &settled) && f >= out.value) {
            out.value = f;
            best_settled = settled;
        }
        out.converged = best_settled;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Numeric gauge of a p-sum via infimal convolution: the gauge of A +_p B at
// x is min over x = u + v of the p-combination of the child gauges. That
// objective is convex in u, so local descent is globally correct. Any
// feasible split gives an upper bound on the gauge, which again errs on the
// small-body side.

struct InfConvResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

inline InfConvResult p_sum_gauge_numeric(const Body& a, const Body& b, const PExponent& pe,
                                         std::span<const double> x,
                                         double early_exit_below = -1.0,
                                         std::uint64_t seed = 0x73756d70ull, int max_iters = 500) {
    InfConvResult out;
    int dim = a.dim;
    double xn = num::norm2(x);
    if (xn == 0.0) {
        out.converged = true;
        return out;
    }

    // bodies here are origin symmetric, so the gauge is even; flip x to a
    // canonical sign so that x and -x take the same descent path and the
    // returned approximations agree bitwise
    Vec xflip;
    for (int i = 0; i < dim; ++i) {
        if (x[i] == 0.0) continue;
        if (x[i] < 0.0) {
            xflip.resize(dim);
            for (int j = 0; j < dim; ++j) xflip[j] = -x[j];
            x = xflip;
        }
        break;
    }

    double ga = a.gauge(x);
    double gb = b.gauge(x);
    out.iterations += 2;

    // best split along the ray u = t x has a closed form by homogeneity
    double t_star;
    if (pe.inf) {
        t_star = gb / (ga + gb);
    } else if (pe.p == 1.0) {
        t_star = ga <= gb ? 1.0 : 0.0;
    } else {
        double q = pe.p / (pe.p - 1.0);
        double m = std::max(ga, gb);
        double aq = std::pow(ga / m, q), bq = std::pow(gb / m, q);
        t_star = bq / (aq + bq);
    }

    Vec u(dim), cand(dim), rest(dim), g(dim);
    for (int i = 0; i < dim; ++i) u[i] = t_star * x[i];
    auto eval = [&](const Vec& split) {
        ++out.iterations;
        for (int i = 0; i < dim; ++i) rest[i] = x[i] - split[i];
        return p_combine(pe, a.gauge(split), b.gauge(rest));
    };
    double f = eval(u);
    if (early_exit_below >= 0.0 && f <= early_exit_below) {
        out.value = f;
        out.converged = true;
        return out;
    }

    rng::Stream rs(seed, 3);
    double eta = 0.25;
    int flat = 0;
    for (int it = 0; it < max_iters; ++it) {
        rs.unit_vector(g);
        for (int i = 0; i < dim; ++i) cand[i] = u[i] + eta * xn * g[i];
        double fc = eval(cand);
        if (fc < f) {
            double gain = f - fc;
            u = cand;
            f = fc;
            eta = std::min(eta * 1.4, 2.0);
            if (early_exit_below >= 0.0 && f <= early_exit_below) {
                out.value = f;
                out.converged = true;
                return out;
            }
            if (gain < 1e-10 * std::max(f, 1e-300)) {
                if (++flat >= 8) {
                    out.converged = true;
                    break;
                }
            } else {
                flat = 0;
            }
        } else {
            eta *= 0.7;
            if (eta < 1e-10) {
                out.converged = true;
                break;
            }
        }
    }
    out.value = f;
    return out;
}

// Support of K at y from its gauge oracle alone.
inline AscendResult dual_gauge_numeric(const Body& k, std::span<const double> y,
                                       const AscendOptions& opts = {}) {
    return ascend_linear_max(k.dim, [&k](std::span<const double> x) { return k.gauge(x); }, y,
                             opts);
}

inline AscendResult dual_gauge_numeric(const SymBody& k, std::span<const double> y,
                                       const AscendOptions& opts = {}) {
    return dual_gauge_numeric(k.node(), y, opts);
}

// ---------------------------------------------------------------------------
// Leaf nodes.

struct EllipsoidBody final : Body {
    Ellipsoid ell;

    explicit EllipsoidBody(Ellipsoid e) : Body(BodyKind::ellipsoid), ell(std::move(e)) {
        dim = ell.dim();
        exact_vol = ell.volume();
    }
    double gauge(std::span<const double> x) const override { return ell.gauge(x); }
    double support(std::span<const double> y) const override { return ell.support(y); }
};

struct LpBallBody final : Body {
    PExponent pe;
    PExponent qe;

    LpBallBody(PExponent p, int n) : Body(BodyKind::lp_ball), pe(p), qe(p.conjugate()) {
        if (n < 1) throw std::invalid_argument("lp_ball: dim must be >= 1");
        dim = n;
        exact_vol = std::exp(detail::lp_ball_log_volume(pe, n));
    }
    double gauge(std::span<const double> x) const override { return lp_norm(x, pe); }
    double support(std::span<const double> y) const override { return lp_norm(y, qe); }
};

namespace detail {

// Convex hull (monotone chain) and shoelace area for the planar volume path.
inline double polygon_area(std::vector<std::array<double, 2>> pts) {
    auto lt = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    };
    std::sort(pts.begin(), pts.end(), lt);
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) {
                              return std::abs(a[0] - b[0]) < 1e-12 && std::abs(a[1] - b[1]) < 1e-12;
                          }),
              pts.end());
    int n = static_cast<int>(pts.size());
    if (n < 3) return 0.0;
    auto cross = [](const auto& o, const auto& a, const auto& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<std::array<double, 2>> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 1e-14) --k;
        hull[k++] = pts[i];
    }
    for (int i = n - 2, lower = k + 1; i >= 0; --i) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 1e-14) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        area += a[0] * b[1] - a[1] * b[0];
    }
    return 0.5 * std::abs(area);
}

inline void require_full_rank(const Mat& rows_mat, const char* what) {
    int n = rows_mat.cols;
    Mat gram(n, n);
    for (int r = 0; r < rows_mat.rows; ++r)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) gram(i, j) += rows_mat(r, i) * rows_mat(r, j);
    auto eig = num::jacobi_eigen(gram);
    double lo = eig.values[0], hi = eig.values[0];
    for (double v : eig.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo > 1e-10 * std::max(hi, 1e-300)))
        throw std::invalid_argument(std::string(what) +
                                    ": rows do not span the space (degenerate body)");
}

}  // namespace detail

// Symmetric polytope, stored as one representative per +/- pair. Either a
// vertex list (conv of +/- rows), a facet list (|a_i . x| <= 1), or both.
struct PolytopeBody final : Body {
    std::optional<Mat> vertices;
    std::optional<Mat> facets;

    PolytopeBody(std::optional<Mat> verts, std::optional<Mat> faces)
        : Body(BodyKind::polytope), vertices(std::move(verts)), facets(std::move(faces)) {
        if (!vertices && !facets)
            throw std::invalid_argument("polytope: need a vertex or facet list");
        const Mat& any = vertices ? *vertices : *facets;
        dim = any.cols;
        if (dim < 1 || any.rows < 1) throw std::invalid_argument("polytope: empty description");
        if (vertices && facets && vertices->cols != facets->cols)
            throw std::invalid_argument("polytope: vertex/facet dimension mismatch");
        if ((vertices && vertices->rows > 128) || (facets && facets->rows > 128))
            throw std::invalid_argument("polytope: at most 128 rows per list");
        if (vertices) detail::require_full_rank(*vertices, "polytope vertices");
        if (facets) detail::require_full_rank(*facets, "polytope facets");
        if (vertices && facets) cross_validate();
        if (dim == 2) {
            double a = planar_area();
            if (a > 0.0) exact_vol = a;
        }
    }

    double gauge(std::span<const double> x) const override {
        if (facets) {
            double m = 0.0;
            for (int i = 0; i < facets->rows; ++i)
                m = std::max(m, std::abs(num::dot(facets->row(i), x)));
            return m;
        }
        return lp_extremum(*vertices, x);
    }

    double support(std::span<const double> y) const override {
        if (vertices) {
            double m = 0.0;
            for (int i = 0; i < vertices->rows; ++i)
                m = std::max(m, std::abs(num::dot(vertices->row(i), y)));
            return m;
        }
        return lp_extremum(*facets, y);
    }

    // Enumerates the polygon's corner set in the plane (both sign copies).
    std::vector<std::array<double, 2>> planar_corners() const {
        std::vector<std::array<double, 2>> pts;
        if (vertices) {
            for (int i = 0; i < vertices->rows; ++i) {
                pts.push_back({(*vertices)(i, 0), (*vertices)(i, 1)});
                pts.push_back({-(*vertices)(i, 0), -(*vertices)(i, 1)});
            }
            return pts;
        }
        const Mat& fm = *facets;
        int m = fm.rows;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (double sj : {1.0, -1.0}) {
                    if (j <= i && sj > 0) continue;
                    double a11 = fm(i, 0), a12 = fm(i, 1);
                    double a21 = sj * fm(j, 0), a22 = sj * fm(j, 1);
                    double det = a11 * a22 - a12 * a21;
                    if (std::abs(det) < 1e-12) continue;
                    double px = (a22 - a12) / det;
                    double py = (a11 - a21) / det;
                    double p[2] = {px, py};
                    if (gauge(p) <= 1.0 + 1e-9) {
                        pts.push_back({px, py});
                        pts.push_back({-px, -py});
                    }
                }
        return pts;
    }

  private:
    void cross_validate() const {
        for (int i = 0; i < vertices->rows; ++i) {
            double m = 0.0;
            for (int j = 0; j < facets->rows; ++j)
                m = std::max(m, std::abs(num::dot(facets->row(j), vertices->row(i))));
            if (std::abs(m - 1.0) > 1e-9)
                throw std::invalid_argument(
                    "polytope: vertex/facet lists disagree (vertex not on the boundary)");
        }
    }

    double planar_area() const { return detail::polygon_area(planar_corners()); }

    // max <x, z> over {|rows_i . z| <= 1}; this is the gauge when rows are
    // vertices and the support when rows are facet normals.
    double lp_extremum(const Mat& rows_mat, std::span<const double> x) const {
        num::LpProblem p;
        p.objective.assign(x.begin(), x.end());
        p.constraints.reserve(2 * rows_mat.rows);
        for (int i = 0; i < rows_mat.rows; ++i) {
            Vec a(rows_mat.row(i).begin(), rows_mat.row(i).end());
            p.constraints.push_back({a, 1.0});
            for (double& v : a) v = -v;
            p.constraints.push_back({std::move(a), 1.0});
        }
        auto r = num::lp_solve(p);
        if (r.status != num::LpStatus::optimal)
            throw std::runtime_error("polytope oracle: LP did not reach an optimum");
        return r.value;
    }
};

// ---------------------------------------------------------------------------
// Composite nodes.

struct PolarBody final : Body {
    BodyPtr inner;

    explicit PolarBody(BodyPtr k) : Body(BodyKind::polar), inner(std::move(k)) {
        dim = inner->dim;
        gauge_exact = inner->support_exact;
        support_exact = inner->gauge_exact;
    }
    double gauge(std::span<const double> x) const override { return inner->support(x); }
    double support(std::span<const double> y) const override { return inner->gauge(y); }
};

struct CapBody final : Body {
    PExponent pe;
    BodyPtr a, b;

    CapBody(PExponent p, BodyPtr left, BodyPtr right)
        : Body(BodyKind::cap), pe(p), a(std::move(left)), b(std::move(right)) {
        if (a->dim != b->dim) throw std::invalid_argument("cap_p: dimension mismatch");
        dim = a->dim;
        gauge_exact = a->gauge_exact && b->gauge_exact;
        support_exact = false;
    }
    double gauge(std::span<const double> x) const override {
        return p_combine(pe, a->gauge(x), b->gauge(x));
    }
    double support(std::span<const double> y) const override {
        return dual_gauge_numeric(*this, y).value;
    }
};

struct SumBody final : Body {
    PExponent pe;  // exponent of the sum
    PExponent qe;  // conjugate, used by the support composition
    BodyPtr a, b;

    SumBody(PExponent p, BodyPtr left, BodyPtr right)
        : Body(BodyKind::sum), pe(p), qe(p.conjugate()), a(std::move(left)), b(std::move(right)) {
        if (a->dim != b->dim) throw std::invalid_argument("sum_p: dimension mismatch");
        dim = a->dim;
        support_exact = a->support_exact && b->support_exact;
        gauge_exact = false;
    }
    double support(std::span<const double> y) const override {
        return p_combine(qe, a->support(y), b->support(y));
    }
    double gauge(std::span<const double> x) const override {
        return p_sum_gauge_numeric(*a, *b, pe, x).value;
    }
    bool contains(std::span<const double> x) const override {
        // membership only needs a split certifying gauge <= 1
        return p_sum_gauge_numeric(*a, *b, pe, x, 1.0).value <= 1.0;
    }
};

struct ProdBody final : Body {
    PExponent pe;
    PExponent qe;
    BodyPtr a, b;

    ProdBody(PExponent p, BodyPtr left, BodyPtr right)
        : Body(BodyKind::prod), pe(p), qe(p.conjugate()), a(std::move(left)), b(std::move(right)) {
        dim = a->dim + b->dim;
        gauge_exact = a->gauge_exact && b->gauge_exact;
        support_exact = a->support_exact && b->support_exact;
        if (a->exact_vol && b->exact_vol) {
            double denom = pe.inf ? 1.0
                                  : num::frac_binom((a->dim + b->dim) / pe.p, a->dim / pe.p);
            exact_vol = *a->exact_vol * *b->exact_vol / denom;
        }
    }
    double gauge(std::span<const double> x) const override {
        return p_combine(pe, a->gauge(x.first(a->dim)), b->gauge(x.subspan(a->dim)));
    }
    double support(std::span<const double> y) const override {
        return p_combine(qe, a->support(y.first(a->dim)), b->support(y.subspan(a->dim)));
    }
};

struct LinearMapBody final : Body {
    Mat map, map_inv, map_t;
    double abs_det = 1.0;
    BodyPtr inner;

    LinearMapBody(Mat t, Mat t_inv, double det_abs, BodyPtr k)
        : Body(BodyKind::linear_map),
          map(std::move(t)),
          map_inv(std::move(t_inv)),
          map_t(map.transposed()),
          abs_det(det_abs),
          inner(std::move(k)) {
        dim = inner->dim;
        gauge_exact = inner->gauge_exact;
        support_exact = inner->support_exact;
        if (inner->exact_vol) exact_vol = *inner->exact_vol * abs_det;
    }
    double gauge(std::span<const double> x) const override {
        Vec u = num::mat_vec(map_inv, x);
        return inner->gauge(u);
    }
    double support(std::span<const double> y) const override {
        Vec u = num::mat_vec(map_t, y);
        return inner->support(u);
    }
};

// ---------------------------------------------------------------------------
// Leaf constructors.

inline SymBody ellipsoid_body(Ellipsoid e) {
    return SymBody(std::make_shared<EllipsoidBody>(std::move(e)));
}

inline SymBody ellipsoid_body(Mat form) { return ellipsoid_body(Ellipsoid(std::move(form))); }

inline SymBody lp_ball(double p, int n) {
    return SymBody(std::make_shared<LpBallBody>(PExponent::of(p), n));
}

inline SymBody cube(int n) { return lp_ball(std::numeric_limits<double>::infinity(), n); }
inline SymBody cross_polytope(int n) { return lp_ball(1.0, n); }
inline SymBody unit_ball(int n) { return lp_ball(2.0, n); }
inline SymBody segment() { return lp_ball(2.0, 1); }

inline SymBody polytope_body(std::optional<Mat> vertices, std::optional<Mat> facets) {
    return detail::finish_node(
        std::make_shared<PolytopeBody>(std::move(vertices), std::move(facets)));
}

inline SymBody polytope_from_vertices(Mat vertices) {
    return polytope_body(std::move(vertices), std::nullopt);
}

inline SymBody polytope_from_facets(Mat facets) {
    return polytope_body(std::nullopt, std::move(facets));
}

}  // namespace mahler
