#pragma once

// Constructors for polar bodies, p-intersections, p-sums, p-products and
// linear images. Where a closed form exists (ellipsoids, lp balls, polytope
// representation swaps, map composition) the result collapses to a leaf;
// everything else becomes a composite node whose oracles do the work.

#include <utility>

#include "bodies.hpp"

namespace mahler {

inline SymBody linear_image(const Mat& t, const SymBody& k);
inline SymBody cap_p(double p, const SymBody& a, const SymBody& b);
inline SymBody sum_p(double p, const SymBody& a, const SymBody& b);
inline SymBody prod_p(double p, const SymBody& a, const SymBody& b);

// Polar dual. Exact structural rules where the dual is classical; otherwise
// a wrapper that swaps the gauge and support oracles.
inline SymBody polar(const SymBody& k) {
    switch (k.kind()) {
        case BodyKind::ellipsoid: {
            const auto& e = static_cast<const EllipsoidBody&>(k.node());
            return ellipsoid_body(e.ell.polar());
        }
        case BodyKind::lp_ball: {
            const auto& b = static_cast<const LpBallBody&>(k.node());
            return SymBody(std::make_shared<LpBallBody>(b.qe, b.dim));
        }
        case BodyKind::polytope: {
            const auto& p = static_cast<const PolytopeBody&>(k.node());
            return polytope_body(p.facets, p.vertices);
        }
        case BodyKind::polar: {
            const auto& w = static_cast<const PolarBody&>(k.node());
            return SymBody(w.inner);
        }
        case BodyKind::linear_map: {
            const auto& m = static_cast<const LinearMapBody&>(k.node());
            return linear_image(m.map_inv.transposed(), polar(SymBody(m.inner)));
        }
        case BodyKind::cap: {
            const auto& c = static_cast<const CapBody&>(k.node());
            return sum_p(c.pe.conjugate().p, polar(SymBody(c.a)), polar(SymBody(c.b)));
        }
        case BodyKind::sum: {
            const auto& s = static_cast<const SumBody&>(k.node());
            return cap_p(s.pe.conjugate().p, polar(SymBody(s.a)), polar(SymBody(s.b)));
        }
        case BodyKind::prod: {
            const auto& pr = static_cast<const ProdBody&>(k.node());
            return prod_p(pr.pe.conjugate().p, polar(SymBody(pr.a)), polar(SymBody(pr.b)));
        }
        default:
            return detail::finish_node(std::make_shared<PolarBody>(k.ptr()));
    }
}

// Intersection-type combination: gauge_p(K, L) has unit ball
// {x : (gauge_K(x)^p + gauge_L(x)^p)^(1/p) <= 1}; p = inf is the plain
// intersection.
inline SymBody cap_p(double p, const SymBody& a, const SymBody& b) {
    return detail::finish_node(
        std::make_shared<CapBody>(PExponent::of(p), a.ptr(), b.ptr()));
}

// Sum-type combination, dual to cap_p: supports combine with the conjugate
// exponent. p = 1 is the convex hull of the union, p = inf the Minkowski sum.
inline SymBody sum_p(double p, const SymBody& a, const SymBody& b) {
    return detail::finish_node(
        std::make_shared<SumBody>(PExponent::of(p), a.ptr(), b.ptr()));
}

// Product on the direct sum of the ambient spaces:
// {(x, y) : (gauge_A(x)^p + gauge_B(y)^p)^(1/p) <= 1}.
inline SymBody prod_p(double p, const SymBody& a, const SymBody& b) {
    return detail::finish_node(
        std::make_shared<ProdBody>(PExponent::of(p), a.ptr(), b.ptr()));
}

// Image T(K) under an invertible linear map.
inline SymBody linear_image(const Mat& t, const SymBody& k) {
    if (t.rows != t.cols || t.rows != k.dim())
        throw std::invalid_argument("linear_image: map must be square of the body dimension");
    auto lu = num::lu_factor(t);
    if (!lu) throw std::invalid_argument("linear_image: map must be invertible");
    Mat t_inv = num::lu_inverse(*lu);
    double abs_det = std::abs(lu->det);
    int n = k.dim();

    switch (k.kind()) {
        case BodyKind::ellipsoid: {
            // {Tx : xT M x <= 1} = {y : yT (T^-T M T^-1) y <= 1}
            const auto& e = static_cast<const EllipsoidBody&>(k.node());
            Mat m2 = t_inv.transposed() * (e.ell.form() * t_inv);
            return ellipsoid_body(Ellipsoid(std::move(m2)));
        }
        case BodyKind::lp_ball: {
            const auto& b = static_cast<const LpBallBody&>(k.node());
            if (!b.pe.inf && b.pe.p == 2.0)
                return ellipsoid_body(Ellipsoid(t_inv.transposed() * t_inv));
            return detail::finish_node(
                std::make_shared<LinearMapBody>(t, std::move(t_inv), abs_det, k.ptr()));
        }
        case BodyKind::polytope: {
            const auto& p = static_cast<const PolytopeBody&>(k.node());
            std::optional<Mat> verts, faces;
            if (p.vertices) {
                Mat v(p.vertices->rows, n);
                for (int r = 0; r < v.rows; ++r)
                    for (int i = 0; i < n; ++i) v(r, i) = num::dot(t.row(i), p.vertices->row(r));
                verts = std::move(v);
            }
            if (p.facets) {
                Mat f(p.facets->rows, n);
                for (int r = 0; r < f.rows; ++r)
                    for (int i = 0; i < n; ++i) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += (*p.facets)(r, j) * t_inv(j, i);
                        f(r, i) = s;
                    }
                faces = std::move(f);
            }
            return polytope_body(std::move(verts), std::move(faces));
        }
        case BodyKind::linear_map: {
            const auto& m = static_cast<const LinearMapBody&>(k.node());
            return detail::finish_node(std::make_shared<LinearMapBody>(
                t * m.map, m.map_inv * t_inv, abs_det * m.abs_det, m.inner));
        }
        default:
            return detail::finish_node(
                std::make_shared<LinearMapBody>(t, std::move(t_inv), abs_det, k.ptr()));
    }
}

// The dilate t * K.
inline SymBody scale_body(double t, const SymBody& k) {
    if (!(t > 0.0)) throw std::invalid_argument("scale_body: factor must be positive");
    Mat s = Mat::identity(k.dim());
    for (int i = 0; i < k.dim(); ++i) s(i, i) = t;
    return linear_image(s, k);
}

// Sheared 2-product S(K x_2 L) with S(x, y) = (x, x + y), so the gauge at
// (u, v) is (gauge_K(u)^2 + gauge_L(v - u)^2)^(1/2). The shear has det 1,
// the slice {v = 0} is K cap_2 L and the shadow on the second factor is
// K sum_2 L.
inline SymBody shear_product(const SymBody& k, const SymBody& l) {
    if (k.dim() != l.dim()) throw std::invalid_argument("shear_product: dimension mismatch");
    int n = k.dim();
    Mat s = Mat::identity(2 * n);
    for (int i = 0; i < n; ++i) s(n + i, i) = 1.0;
    return linear_image(s, prod_p(2.0, k, l));
}

}  // namespace mahler
