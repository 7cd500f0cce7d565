#pragma once

// Volume-product bounds through sandwich certificates, and the recursion
// that certifies them numerically.
//
// Write s(K) = Vol K . Vol K° / b_n^2 for the normalized volume product of
// a symmetric body K with E1 <= K <= E2 and per-dimension volume ratio
// r = (Vol E2 / Vol E1)^(1/n).
//
//  - r <= 4: Vol K >= Vol E1 and Vol K° >= Vol E2°, and for the ellipsoid
//    pair Vol E1 . Vol E2° = b_n^2 r^(-n), so s(K) >= r^(-n) directly.
//  - r > 4: the interpolating ellipsoid F (form Q, the geometric mean of
//    the two forms) transports the polar to Kp = Q^(-1) K°, which shares
//    the sandwich (E1, E2) and has Vol Kp = Vol K° / det Q. The sheared
//    2-product C = S(K x_2 Kp) with S(x, y) = (x, x + y) has determinant
//    one, slice K cap_2 Kp and shadow K sum_2 Kp, and
//    Vol K . Vol Kp = binom(n, n/2) . Vol C with the fractional binomial.
//    Rogers-Shephard on C bounds Vol C from below by the slice-shadow
//    product over binom(2n, n), the shadow is the transported polar of the
//    slice up to the same det Q, and the quotient of the two binomials is
//    at least 2^(-n). The slice is sandwiched by ((1/sqrt2) E1, (1/sqrt2) F)
//    with ratio sqrt r, so s(K) >= 2^(-n) s(K cap_2 Kp) and the recursion
//    halves log2 r each level. Once the ratio lands in (2, 4] the
//    telescoped product (2^levels . r_final)^(-n) dominates the closed form
//    (2 log2 r)^(-n), which is what sandwich_bound returns.
//
// verify_chain_step re-verifies every identity and inequality above on one
// level and verify_chain runs the recursion, compares the telescoped
// product against the closed form, and checks the measured volume product
// against both the final bound and the Santalo upper bound.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ops.hpp"
#include "volume.hpp"

namespace mahler {

// ---------------------------------------------------------------------------
// Bound functions.

// s(K) >= r^(-n) for any K sandwiched with ratio r >= 1.
inline double direct_bound(double r, int n) {
    if (!(r >= 1.0)) throw std::domain_error("direct_bound: ratio must be >= 1");
    if (n < 1) throw std::domain_error("direct_bound: dimension must be positive");
    return std::exp(-n * std::log(r));
}

// s(K) >= (2 log2 r)^(-n) for sandwich ratio r >= 2. Below 2 the closed
// form is invalid (the base of the power drops under 1 only for r < 2 in
// the wrong direction); direct_bound is sharper there and applies instead.
inline double sandwich_bound(double r, int n) {
    if (!(r >= 2.0))
        throw std::domain_error("sandwich_bound: ratio must be >= 2; use direct_bound below 2");
    if (n < 1) throw std::domain_error("sandwich_bound: dimension must be positive");
    return std::exp(-n * std::log(2.0 * std::log2(r)));
}

// s(K) >= (log2 n)^(-n) for every symmetric K in dimension n >= 4, by
// feeding the John pair (J, sqrt(n) J) to the sandwich bound.
inline double dimension_bound(int n) {
    if (n < 4) throw std::domain_error("dimension_bound: needs dimension >= 4");
    return sandwich_bound(std::sqrt(static_cast<double>(n)), n);
}

// ---------------------------------------------------------------------------
// Measured volume product.

struct ProductEstimate {
    double value = 0.0;  // Vol K . Vol K° / b_n^2
    double ci95 = 0.0;   // first-order propagated 95% half width
    bool usable = true;
    VolumeEstimate vol_body;
    VolumeEstimate vol_polar;
};

inline ProductEstimate volume_product_ratio(const SymBody& k, const VolumeOptions& opts = {}) {
    int n = k.dim();
    VolumeOptions ob = opts;
    VolumeOptions op = opts;
    ob.seed = rng::mix64(opts.seed ^ 0x4b626f6479ull);
    op.seed = rng::mix64(opts.seed ^ 0x4b706f6cull);
    op.envelope.reset();  // a caller-supplied envelope fits K, never K°

    ProductEstimate out;
    out.vol_body = estimate_volume(k, ob);
    out.vol_polar = estimate_volume(polar(k), op);
    double bn2 = std::exp(2.0 * num::log_ball_volume(n));
    out.value = out.vol_body.value * out.vol_polar.value / bn2;
    out.usable = out.vol_body.usable && out.vol_polar.usable;
    if (out.usable) {
        double rel = 0.0;
        if (out.vol_body.value > 0.0) rel += out.vol_body.half_width_95 / out.vol_body.value;
        if (out.vol_polar.value > 0.0) rel += out.vol_polar.half_width_95 / out.vol_polar.value;
        out.ci95 = out.value * rel;
    }
    return out;
}

// Kp = Q^(-1) K° for the form Q of the interpolating ellipsoid; Kp carries
// the same sandwich as K and Vol Kp = Vol K° / det Q.
inline SymBody identify_polar(const SymBody& k, const Ellipsoid& f) {
    if (f.dim() != k.dim()) throw std::invalid_argument("identify_polar: dimension mismatch");
    return linear_image(f.form_inv(), polar(k));
}

// ---------------------------------------------------------------------------
// Check records. Each verification leaves one record; pass is decided at
// the check site, ci holds the statistical allowance that entered the
// decision (0 for deterministic checks) and tolerance the deterministic one.

struct StepRecord {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double ci = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool exact = true;  // false once a Monte Carlo estimate enters
    std::string note;
};

struct ChainOptions {
    long long samples = 200000;
    std::uint64_t seed = 0;
    int threads = 1;
    bool run_mc = true;            // statistical cross checks at the root level
    int check_dirs = 1000;         // directions for identity and inclusion checks
    int pointwise_samples = 10000;
    double identity_tol = 1e-12;   // relative, exact oracle identities
    double pointwise_tol = 1e-9;   // relative slack for the mean inequality
    double inclusion_tol = 1e-7;   // sampled inclusion ratio slack
    double exact_tol = 1e-9;       // relative, closed-form volume identities
};

struct StepResult {
    int level = 0;
    int dim = 0;
    double ratio = 1.0;
    bool base_case = false;     // ratio <= 4, recursion stops here
    double level_factor = 1.0;  // r^(-n) at the base, 2^(-n) per recursion level
    bool pass = false;
    std::vector<StepRecord> records;
    std::optional<SymBody> next_body;
    std::optional<SandwichCertificate> next_cert;
};

// Santalo direction: the measured product may not exceed 1 beyond three
// propagated confidence widths.
inline StepRecord santalo_check(const SymBody& k, const VolumeOptions& opts = {}) {
    auto pr = volume_product_ratio(k, opts);
    StepRecord rec;
    rec.name = "santalo-upper";
    rec.lhs = pr.value;
    rec.rhs = 1.0;
    rec.ci = 3.0 * pr.ci95;
    rec.tolerance = 1e-9;
    rec.exact = pr.vol_body.method == "exact" && pr.vol_polar.method == "exact";
    rec.pass = pr.usable && pr.value <= 1.0 + rec.ci + rec.tolerance;
    if (!pr.usable) rec.note = "volume estimate unusable";
    return rec;
}

namespace detail {

inline std::uint64_t chain_seed(std::uint64_t seed, int level, int slot) {
    return rng::mix64(seed ^ (0x9e3779b97f4a7c15ull + 64ull * static_cast<std::uint64_t>(level) +
                              static_cast<std::uint64_t>(slot)));
}

// worst sampled ratio for E inside K; <= 1 certifies the containment
inline double inner_fit_ratio(const Body& k, const Ellipsoid& e, int dirs, std::uint64_t seed) {
    if (!k.gauge_exact && k.support_exact)
        return max_gauge_quotient(
            e.dim(), [&](std::span<const double> u) { return e.support(u); },
            [&](std::span<const double> u) { return k.support(u); }, dirs, seed);
    return max_gauge_on_boundary(k, e, dirs, seed);
}

// worst sampled ratio for K inside E
inline double outer_fit_ratio(const Body& k, const Ellipsoid& e, int dirs, std::uint64_t seed) {
    if (!k.gauge_exact && k.support_exact) return max_support_ratio(k, e, dirs, seed).worst;
    return max_envelope_gauge_ratio(k, e, dirs, seed);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// One level of the recursion. All identity and inclusion checks run
// regardless of the ratio; a successor certificate is emitted only when
// r > 4. Failed checks mark the step failed but do not abort it, so a
// report localizes breakage. Statistical checks (Monte Carlo volumes)
// execute at level 0, where every oracle is structurally cheap.
inline StepResult verify_chain_step(const SymBody& k, const SandwichCertificate& cert,
                                    const ChainOptions& opts = {}, int level = 0) {
    int n = k.dim();
    if (cert.inner.dim() != n || cert.outer.dim() != n)
        throw std::invalid_argument("verify_chain_step: certificate dimension mismatch");

    StepResult out;
    out.level = level;
    out.dim = n;
    out.ratio = cert.ratio;
    out.base_case = !(cert.ratio > 4.0);
    auto seed_at = [&](int slot) { return detail::chain_seed(opts.seed, level, slot); };
    auto add = [&](StepRecord r) { out.records.push_back(std::move(r)); };

    {
        StepRecord r;
        r.name = "certificate-inner";
        r.lhs = detail::inner_fit_ratio(k.node(), cert.inner, opts.check_dirs, seed_at(1));
        r.rhs = 1.0;
        r.tolerance = opts.inclusion_tol;
        r.pass = r.lhs <= 1.0 + r.tolerance;
        add(std::move(r));
    }
    {
        StepRecord r;
        r.name = "certificate-outer";
        r.lhs = detail::outer_fit_ratio(k.node(), cert.outer, opts.check_dirs, seed_at(2));
        r.rhs = 1.0;
        r.tolerance = opts.inclusion_tol;
        r.pass = r.lhs <= 1.0 + r.tolerance;
        add(std::move(r));
    }
    {
        StepRecord r;
        r.name = "certificate-ratio";
        r.lhs = cert.ratio;
        r.rhs = std::exp((cert.outer.log_volume() - cert.inner.log_volume()) / n);
        r.tolerance = 1e-12;
        r.pass = std::abs(r.lhs - r.rhs) <= r.tolerance * std::max(1.0, std::abs(r.rhs));
        add(std::move(r));
    }

    // the interpolating ellipsoid; without it nothing downstream is defined
    std::optional<Ellipsoid> f;
    try {
        f = interpolating_ellipsoid(cert.inner, cert.outer);
    } catch (const std::exception& e) {
        StepRecord r;
        r.name = "interpolating-form";
        r.pass = false;
        r.note = e.what();
        add(std::move(r));
        out.pass = false;
        return out;
    }
    {
        StepRecord r;
        r.name = "interpolating-form";
        Mat in_res = f->form() * (cert.outer.form_inv() * f->form());
        Mat out_res = f->form() * (cert.inner.form_inv() * f->form());
        double ri = num::max_abs_diff(in_res, cert.inner.form()) /
                    std::max(1.0, num::frobenius_norm(cert.inner.form()));
        double ro = num::max_abs_diff(out_res, cert.outer.form()) /
                    std::max(1.0, num::frobenius_norm(cert.outer.form()));
        r.lhs = std::max(ri, ro);
        r.rhs = 0.0;
        r.tolerance = 1e-10;
        r.pass = r.lhs <= r.tolerance;
        add(std::move(r));
    }
    {
        StepRecord r;
        r.name = "interpolating-volume";
        r.lhs = f->log_volume();
        r.rhs = 0.5 * (cert.inner.log_volume() + cert.outer.log_volume());
        r.tolerance = opts.exact_tol;
        r.pass = std::abs(r.lhs - r.rhs) <= r.tolerance;
        add(std::move(r));
    }

    // transported polar and its sandwich, tested on the polar side where
    // Kp° = Q K keeps every oracle exact: E1 <= Kp iff Kp° <= E1°, and
    // Kp <= E2 iff E2° <= Kp°
    SymBody kp = identify_polar(k, *f);
    auto kp_polar_gauge = [&](std::span<const double> x) {
        Vec y = num::mat_vec(f->form_inv(), x);
        return k.gauge(y);
    };
    {
        StepRecord r;
        r.name = "polar-sandwich-inner";
        r.lhs = detail::max_gauge_quotient(
            n, [&](std::span<const double> u) { return cert.inner.support(u); }, kp_polar_gauge,
            opts.check_dirs, seed_at(3));
        r.rhs = 1.0;
        r.tolerance = opts.inclusion_tol;
        r.pass = r.lhs <= 1.0 + r.tolerance;
        r.note = "tested as Kp polar inside E1 polar";
        add(std::move(r));
    }
    {
        StepRecord r;
        r.name = "polar-sandwich-outer";
        r.lhs = detail::max_gauge_quotient(
            n, kp_polar_gauge, [&](std::span<const double> u) { return cert.outer.support(u); },
            opts.check_dirs, seed_at(4));
        r.rhs = 1.0;
        r.tolerance = opts.inclusion_tol;
        r.pass = r.lhs <= 1.0 + r.tolerance;
        r.note = "tested as E2 polar inside Kp polar";
        add(std::move(r));
    }

    SymBody c = shear_product(k, kp);
    SymBody slice = cap_p(2.0, k, kp);
    SymBody shadow = sum_p(2.0, k, kp);

    {
        // gauge of C at (x, 0) is the gauge of the 2-intersection at x;
        // numeric gauges (transported polars of deeper levels) only agree to
        // their own convergence, so the tolerance widens there
        StepRecord r;
        r.name = "slice-gauge-identity";
        bool oracle_exact = slice.node().gauge_exact;
        auto dirs = rng::unit_directions(n, opts.check_dirs, seed_at(5));
        Vec z(2 * n, 0.0);
        double worst = 0.0;
        for (const auto& u : dirs) {
            for (int i = 0; i < n; ++i) z[i] = u[i];
            double a = c.gauge(z);
            double b = slice.gauge(u);
            worst = std::max(worst, std::abs(a - b) / std::max(b, 1e-300));
        }
        r.lhs = worst;
        r.rhs = 0.0;
        r.tolerance = oracle_exact ? opts.identity_tol : 1e-8;
        if (!oracle_exact) r.note = "numeric gauge, relaxed tolerance";
        r.pass = r.lhs <= r.tolerance;
        add(std::move(r));
    }
    {
        // support of C at (0, w) is the support of the 2-sum at w
        StepRecord r;
        r.name = "shadow-support-identity";
        bool oracle_exact = shadow.node().support_exact && c.node().support_exact;
        int dir_count = oracle_exact ? opts.check_dirs : std::min(opts.check_dirs, 50);
        auto dirs = rng::unit_directions(n, dir_count, seed_at(6));
        Vec z(2 * n, 0.0);
        double worst = 0.0;
        for (const auto& u : dirs) {
            for (int i = 0; i < n; ++i) z[n + i] = u[i];
            double a = c.support(z);
            double b = shadow.support(u);
            worst = std::max(worst, std::abs(a - b) / std::max(b, 1e-300));
        }
        r.lhs = worst;
        r.rhs = 0.0;
        r.tolerance = oracle_exact ? opts.identity_tol : 1e-8;
        if (!oracle_exact) r.note = "numeric support, relaxed tolerance and fewer directions";
        r.pass = r.lhs <= r.tolerance;
        add(std::move(r));
    }
    {
        // gauge_K(x)^2 + gauge_Kp(x)^2 >= 2 gauge_F(x)^2 pointwise: the
        // squared slice gauge dominates twice the squared F gauge
        StepRecord r;
        r.name = "pointwise-mean-inequality";
        auto dirs = rng::unit_directions(n, opts.pointwise_samples, seed_at(7));
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& u : dirs) {
            double gk = k.gauge(u);
            double gp = kp.gauge(u);
            double gf = f->gauge(u);
            double denom = 2.0 * gf * gf;
            worst = std::min(worst, (gk * gk + gp * gp - denom) / std::max(denom, 1e-300));
        }
        r.lhs = worst;
        r.rhs = 0.0;
        r.tolerance = opts.pointwise_tol;
        r.pass = r.lhs >= -r.tolerance;
        add(std::move(r));
    }
    {
        StepRecord r;
        r.name = "slice-inner-inclusion";
        r.lhs = detail::max_gauge_quotient(
            n, [&](std::span<const double> u) { return slice.gauge(u); },
            [&](std::span<const double> u) { return std::sqrt(2.0) * cert.inner.gauge(u); },
            opts.check_dirs, seed_at(8));
        r.rhs = 1.0;
        r.tolerance = opts.inclusion_tol;
        r.pass = r.lhs <= 1.0 + r.tolerance;
        r.note = "E1 over sqrt 2 inside the intersection";
        add(std::move(r));
    }
    {
        StepRecord r;
        r.name = "slice-outer-inclusion";
        r.lhs = detail::max_gauge_quotient(
            n, [&](std::span<const double> u) { return std::sqrt(2.0) * f->gauge(u); },
            [&](std::span<const double> u) { return slice.gauge(u); }, opts.check_dirs,
            seed_at(9));
        r.rhs = 1.0;
        r.tolerance = opts.inclusion_tol;
        r.pass = r.lhs <= 1.0 + r.tolerance;
        r.note = "intersection inside F over sqrt 2";
        add(std::move(r));
    }

    // volume identities: the closed chain Vol K . Vol Kp = binom(n, n/2) Vol C
    // and Rogers-Shephard on C
    bool mc_here = opts.run_mc && level == 0;
    double fb = num::frac_binom(static_cast<double>(n), n / 2.0);
    auto exact_k = volume_exact(k);
    auto exact_kp = volume_exact(kp);
    auto exact_c = volume_exact(c);
    bool all_exact = exact_k && exact_kp && exact_c;
    try {
        if (all_exact) {
            StepRecord r;
            r.name = "product-volume";
            r.lhs = exact_k->value * exact_kp->value;
            r.rhs = fb * exact_c->value;
            r.tolerance = opts.exact_tol;
            r.pass = std::abs(r.lhs - r.rhs) <= r.tolerance * std::max(std::abs(r.lhs), std::abs(r.rhs));
            add(std::move(r));
        }
        if (mc_here) {
            VolumeOptions vo;
            vo.samples = opts.samples;
            vo.threads = opts.threads;
            if (all_exact) {
                vo.seed = seed_at(10);
                vo.force_mc = true;
                auto mc = estimate_volume(c, vo);
                StepRecord r;
                r.name = "product-volume-mc";
                r.lhs = mc.value;
                r.rhs = exact_k->value * exact_kp->value / fb;
                r.ci = 3.0 * mc.half_width_95;
                r.exact = false;
                r.pass = mc.usable && std::abs(r.lhs - r.rhs) <= r.ci + opts.exact_tol * r.rhs;
                add(std::move(r));
            } else {
                vo.seed = seed_at(10);
                auto va = estimate_volume(k, vo);
                vo.seed = seed_at(11);
                auto vp = estimate_volume(kp, vo);
                vo.seed = seed_at(12);
                auto vc = estimate_volume(c, vo);
                StepRecord r;
                r.name = "product-volume";
                r.lhs = va.value * vp.value;
                r.rhs = fb * vc.value;
                r.ci = 3.0 * (va.half_width_95 * vp.value + vp.half_width_95 * va.value +
                              fb * vc.half_width_95);
                r.exact = false;
                r.pass = va.usable && vp.usable && vc.usable &&
                         std::abs(r.lhs - r.rhs) <=
                             r.ci + opts.exact_tol * std::max(std::abs(r.lhs), std::abs(r.rhs));
                add(std::move(r));
            }
        } else if (!all_exact) {
            StepRecord r;
            r.name = "product-volume";
            r.pass = true;
            r.exact = false;
            r.note = "not evaluated: no closed-form volumes and statistical checks off here";
            add(std::move(r));
        }

        {
            StepRecord r;
            r.name = "rogers-shephard";
            if (mc_here) {
                double binom2n = num::frac_binom(2.0 * n, static_cast<double>(n));
                VolumeOptions vo;
                vo.samples = opts.samples;
                vo.threads = opts.threads;
                vo.seed = seed_at(13);
                auto vc = estimate_volume(c, vo);
                vo.seed = seed_at(14);
                auto vs = estimate_volume(slice, vo);
                vo.seed = seed_at(15);
                auto vsh = estimate_volume(shadow, vo);
                r.lhs = vc.value;
                r.rhs = vs.value * vsh.value / binom2n;
                r.ci = 3.0 * (vc.half_width_95 +
                              (vs.half_width_95 * vsh.value + vsh.half_width_95 * vs.value) /
                                  binom2n);
                r.exact = false;
                r.pass = vc.usable && vs.usable && vsh.usable &&
                         r.lhs >= r.rhs - r.ci - opts.exact_tol * std::abs(r.rhs);
            } else {
                r.pass = true;
                r.exact = false;
                r.note = "not evaluated: statistical checks off here";
            }
            add(std::move(r));
        }
    } catch (const std::exception& e) {
        StepRecord r;
        r.name = "volume-checks";
        r.pass = false;
        r.exact = false;
        r.note = e.what();
        add(std::move(r));
    }

    if (out.base_case) {
        // at the base the bound is r^(-n) through the exact ellipsoid
        // identity Vol E1 . Vol E2° = b_n^2 r^(-n)
        StepRecord r;
        r.name = "polar-volume-identity";
        double log_lhs = cert.inner.log_volume() + cert.outer.polar().log_volume();
        double log_rhs = 2.0 * num::log_ball_volume(n) - n * std::log(cert.ratio);
        r.lhs = std::exp(log_lhs);
        r.rhs = std::exp(log_rhs);
        r.tolerance = opts.exact_tol;
        r.pass = std::abs(log_lhs - log_rhs) <= r.tolerance;
        add(std::move(r));
        out.level_factor = direct_bound(std::max(cert.ratio, 1.0), n);
    } else {
        {
            // the actual per-level constant binom(n, n/2) / binom(2n, n)
            // dominates the 2^(-n) used by the telescoped product
            StepRecord r;
            r.name = "level-constant";
            r.lhs = fb / num::frac_binom(2.0 * n, static_cast<double>(n));
            r.rhs = std::ldexp(1.0, -n);
            r.tolerance = 1e-12;
            r.pass = r.lhs >= r.rhs * (1.0 - r.tolerance);
            add(std::move(r));
        }
        Ellipsoid next_inner = cert.inner.scaled(1.0 / std::sqrt(2.0));
        Ellipsoid next_outer = f->scaled(1.0 / std::sqrt(2.0));
        double next_ratio = std::exp((next_outer.log_volume() - next_inner.log_volume()) / n);
        {
            StepRecord r;
            r.name = "next-ratio";
            r.lhs = next_ratio;
            r.rhs = std::sqrt(cert.ratio);
            r.tolerance = 1e-9;
            r.pass = std::abs(r.lhs - r.rhs) <= r.tolerance * std::max(1.0, std::abs(r.rhs));
            add(std::move(r));
        }
        out.next_body = slice;
        out.next_cert = SandwichCertificate{std::move(next_inner), std::move(next_outer), next_ratio};
        out.level_factor = std::ldexp(1.0, -n);
    }

    out.pass = std::all_of(out.records.begin(), out.records.end(),
                           [](const StepRecord& r) { return r.pass; });
    return out;
}

// ---------------------------------------------------------------------------
// Full chain run.

struct TraceEntry {
    int level = 0;
    int dim = 0;
    double ratio = 1.0;
    bool base_case = false;
    double level_factor = 1.0;
    double accumulated = 1.0;  // product of factors through this level
};

struct ChainReport {
    int dim = 0;
    double initial_ratio = 0.0;
    int levels = 0;                 // recursion levels before the base case
    double telescoped_bound = 0.0;  // 2^(-n levels) r_final^(-n)
    double final_bound = 0.0;       // closed form when r0 >= 2, else r0^(-n)
    bool closed_form = false;
    double measured_product = 0.0;
    double measured_ci95 = 0.0;
    bool measured_exact = false;
    bool pass = false;
    std::string note;
    std::vector<StepResult> steps;
    std::vector<TraceEntry> trace;
    std::vector<StepRecord> summary;
    ChainOptions options;
};

inline ChainReport verify_chain(const SymBody& k,
                                std::optional<SandwichCertificate> certificate = {},
                                const ChainOptions& opts = {}) {
    int n = k.dim();
    if (n > 4)
        throw std::invalid_argument(
            "verify_chain: dimension capped at 4; the sheared product doubles it and "
            "sampling beyond 8 dimensions is not supported here");

    ChainReport rep;
    rep.options = opts;
    rep.dim = n;
    SandwichCertificate cert =
        certificate ? std::move(*certificate)
                    : john_sandwich(k, opts.check_dirs, opts.inclusion_tol,
                                    detail::chain_seed(opts.seed, 0, 0));
    rep.initial_ratio = cert.ratio;

    SymBody cur = k;
    int level = 0;
    bool ok = true;
    double log_factor = 0.0;
    while (true) {
        if (level > 20) {
            rep.note = "recursion exceeded 20 levels";
            ok = false;
            break;
        }
        StepResult st = verify_chain_step(cur, cert, opts, level);
        ok = ok && st.pass;
        log_factor += std::log(st.level_factor);
        rep.trace.push_back(
            {level, st.dim, st.ratio, st.base_case, st.level_factor, std::exp(log_factor)});
        bool base = st.base_case;
        auto next_body = st.next_body;
        auto next_cert = st.next_cert;
        rep.steps.push_back(std::move(st));
        if (base) break;
        if (!next_body || !next_cert) {
            rep.note = "recursion step produced no successor";
            ok = false;
            break;
        }
        cur = *next_body;
        cert = *next_cert;
        ++level;
    }

    rep.levels = static_cast<int>(
        std::count_if(rep.steps.begin(), rep.steps.end(),
                      [](const StepResult& s) { return !s.base_case; }));
    rep.telescoped_bound = std::exp(log_factor);

    double r0 = rep.initial_ratio;
    if (r0 >= 2.0 * (1.0 - 1e-12)) {
        rep.final_bound = sandwich_bound(std::max(r0, 2.0), n);
        rep.closed_form = true;
    } else {
        rep.final_bound = direct_bound(std::max(r0, 1.0), n);
        rep.closed_form = false;
        if (!rep.note.empty()) rep.note += "; ";
        rep.note += "initial ratio below 2: closed form not applicable, using the direct bound";
    }

    {
        // guaranteed by 2^t <= 2t on [1, 2]; recorded, and flagged through
        // the note rather than failed if floating point ever disagrees
        StepRecord r;
        r.name = "telescoped-covers-final";
        r.lhs = rep.telescoped_bound;
        r.rhs = rep.final_bound;
        r.tolerance = 1e-12;
        r.pass = true;
        if (!(rep.telescoped_bound >= rep.final_bound * (1.0 - r.tolerance))) {
            if (!rep.note.empty()) rep.note += "; ";
            rep.note += "telescoped product fell below the closed-form bound";
        }
        rep.summary.push_back(std::move(r));
    }

    VolumeOptions vo;
    vo.samples = opts.samples;
    vo.threads = opts.threads;
    vo.seed = detail::chain_seed(opts.seed, 0, 40);
    auto measured = volume_product_ratio(k, vo);
    rep.measured_product = measured.value;
    rep.measured_ci95 = measured.ci95;
    rep.measured_exact =
        measured.vol_body.method == "exact" && measured.vol_polar.method == "exact";
    {
        StepRecord r;
        r.name = "measured-above-final";
        r.lhs = measured.value;
        r.rhs = rep.final_bound;
        r.ci = 3.0 * measured.ci95;
        r.tolerance = 1e-12;
        r.exact = rep.measured_exact;
        r.pass = measured.usable && r.lhs >= r.rhs - r.ci - r.tolerance;
        rep.summary.push_back(std::move(r));
    }
    {
        StepRecord r;
        r.name = "measured-above-telescoped";
        r.lhs = measured.value;
        r.rhs = rep.telescoped_bound;
        r.ci = 3.0 * measured.ci95;
        r.tolerance = 1e-12;
        r.exact = rep.measured_exact;
        r.pass = measured.usable && r.lhs >= r.rhs - r.ci - r.tolerance;
        rep.summary.push_back(std::move(r));
    }
    {
        StepRecord r;
        r.name = "santalo-upper";
        r.lhs = measured.value;
        r.rhs = 1.0;
        r.ci = 3.0 * measured.ci95;
        r.tolerance = 1e-9;
        r.exact = rep.measured_exact;
        r.pass = measured.usable && r.lhs <= 1.0 + r.ci + r.tolerance;
        rep.summary.push_back(std::move(r));
    }

    rep.pass = ok && std::all_of(rep.summary.begin(), rep.summary.end(),
                                 [](const StepRecord& r) { return r.pass; });
    return rep;
}

// ---------------------------------------------------------------------------
// Report serialization. All numbers print through %.12g so files are
// byte-identical across runs; the thread count never enters a report.

namespace detail {

inline std::string fmt12(double v) {
    if (!std::isfinite(v)) return v > 0 ? "1e999" : (v < 0 ? "-1e999" : "0");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string json_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    out += "\"";
    return out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

inline void record_json(std::string& out, const StepRecord& r) {
    out += "{\"name\":" + json_quote(r.name) + ",\"lhs\":" + fmt12(r.lhs) +
           ",\"rhs\":" + fmt12(r.rhs) + ",\"ci\":" + fmt12(r.ci) +
           ",\"tolerance\":" + fmt12(r.tolerance) + ",\"pass\":" + (r.pass ? "true" : "false") +
           ",\"exact\":" + (r.exact ? "true" : "false") + ",\"note\":" + json_quote(r.note) + "}";
}

}  // namespace detail

inline std::string volume_estimate_json(const VolumeEstimate& est) {
    return "{\"value\":" + detail::fmt12(est.value) + ",\"ci95\":" +
           detail::fmt12(est.half_width_95) + ",\"method\":" + detail::json_quote(est.method) +
           ",\"samples\":" + std::to_string(est.samples) +
           ",\"seed\":" + std::to_string(est.seed) + "}";
}

inline std::string chain_report_json(const ChainReport& rep) {
    std::string j = "{\n";
    j += "  \"format\": \"mahler-chain-report\",\n  \"version\": 1,\n";
    j += "  \"config\": {\"samples\": " + std::to_string(rep.options.samples) +
         ", \"seed\": " + std::to_string(rep.options.seed) +
         ", \"run_mc\": " + (rep.options.run_mc ? std::string("true") : std::string("false")) +
         ", \"check_dirs\": " + std::to_string(rep.options.check_dirs) +
         ", \"pointwise_samples\": " + std::to_string(rep.options.pointwise_samples) + "},\n";
    j += "  \"dim\": " + std::to_string(rep.dim) + ",\n";
    j += "  \"initial_ratio\": " + detail::fmt12(rep.initial_ratio) + ",\n";
    j += "  \"levels\": " + std::to_string(rep.levels) + ",\n";
    j += "  \"telescoped_bound\": " + detail::fmt12(rep.telescoped_bound) + ",\n";
    j += "  \"final_bound\": " + detail::fmt12(rep.final_bound) + ",\n";
    j += "  \"closed_form\": " + std::string(rep.closed_form ? "true" : "false") + ",\n";
    j += "  \"measured_product\": " + detail::fmt12(rep.measured_product) + ",\n";
    j += "  \"measured_ci95\": " + detail::fmt12(rep.measured_ci95) + ",\n";
    j += "  \"measured_exact\": " + std::string(rep.measured_exact ? "true" : "false") + ",\n";
    j += "  \"pass\": " + std::string(rep.pass ? "true" : "false") + ",\n";
    j += "  \"note\": " + detail::json_quote(rep.note) + ",\n";
    j += "  \"trace\": [\n";
    for (std::size_t i = 0; i < rep.trace.size(); ++i) {
        const auto& t = rep.trace[i];
        j += "    {\"level\": " + std::to_string(t.level) + ", \"dim\": " + std::to_string(t.dim) +
             ", \"ratio\": " + detail::fmt12(t.ratio) +
             ", \"base_case\": " + (t.base_case ? "true" : "false") +
             ", \"level_factor\": " + detail::fmt12(t.level_factor) +
             ", \"accumulated\": " + detail::fmt12(t.accumulated) + "}";
        j += (i + 1 < rep.trace.size()) ? ",\n" : "\n";
    }
    j += "  ],\n  \"steps\": [\n";
    for (std::size_t i = 0; i < rep.steps.size(); ++i) {
        const auto& s = rep.steps[i];
        j += "    {\"level\": " + std::to_string(s.level) + ", \"dim\": " + std::to_string(s.dim) +
             ", \"ratio\": " + detail::fmt12(s.ratio) +
             ", \"base_case\": " + (s.base_case ? "true" : "false") +
             ", \"level_factor\": " + detail::fmt12(s.level_factor) +
             ", \"pass\": " + (s.pass ? "true" : "false") + ", \"records\": [\n";
        for (std::size_t rix = 0; rix < s.records.size(); ++rix) {
            j += "      ";
            detail::record_json(j, s.records[rix]);
            j += (rix + 1 < s.records.size()) ? ",\n" : "\n";
        }
        j += "    ]}";
        j += (i + 1 < rep.steps.size()) ? ",\n" : "\n";
    }
    j += "  ],\n  \"summary\": [\n";
    for (std::size_t i = 0; i < rep.summary.size(); ++i) {
        j += "    ";
        detail::record_json(j, rep.summary[i]);
        j += (i + 1 < rep.summary.size()) ? ",\n" : "\n";
    }
    j += "  ]\n}\n";
    return j;
}

inline std::string chain_report_csv(const ChainReport& rep) {
    std::string c = "# mahler-chain-report v1\n";
    c += "# config samples=" + std::to_string(rep.options.samples) +
         " seed=" + std::to_string(rep.options.seed) +
         " run_mc=" + std::to_string(rep.options.run_mc ? 1 : 0) +
         " check_dirs=" + std::to_string(rep.options.check_dirs) +
         " pointwise_samples=" + std::to_string(rep.options.pointwise_samples) + "\n";
    c += "section,level,name,lhs,rhs,ci,tolerance,pass,exact,note\n";
    auto meta = [&](const std::string& name, const std::string& value) {
        c += "meta,," + name + "," + value + ",,,,,,\n";
    };
    meta("dim", std::to_string(rep.dim));
    meta("initial_ratio", detail::fmt12(rep.initial_ratio));
    meta("levels", std::to_string(rep.levels));
    meta("telescoped_bound", detail::fmt12(rep.telescoped_bound));
    meta("final_bound", detail::fmt12(rep.final_bound));
    meta("closed_form", rep.closed_form ? "1" : "0");
    meta("measured_product", detail::fmt12(rep.measured_product));
    meta("measured_ci95", detail::fmt12(rep.measured_ci95));
    meta("measured_exact", rep.measured_exact ? "1" : "0");
    meta("pass", rep.pass ? "1" : "0");
    if (!rep.note.empty()) c += "meta,,note,,,,,,," + detail::csv_field(rep.note) + "\n";
    for (const auto& t : rep.trace) {
        c += "trace," + std::to_string(t.level) + "," + (t.base_case ? "base" : "recurse") + "," +
             detail::fmt12(t.ratio) + "," + detail::fmt12(t.level_factor) + "," +
             detail::fmt12(t.accumulated) + ",,,,\n";
    }
    auto record_row = [&](const std::string& section, const std::string& level,
                          const StepRecord& r) {
        c += section + "," + level + "," + r.name + "," + detail::fmt12(r.lhs) + "," +
             detail::fmt12(r.rhs) + "," + detail::fmt12(r.ci) + "," + detail::fmt12(r.tolerance) +
             "," + (r.pass ? "1" : "0") + "," + (r.exact ? "1" : "0") + "," +
             detail::csv_field(r.note) + "\n";
    };
    for (const auto& s : rep.steps)
        for (const auto& r : s.records) record_row("step", std::to_string(s.level), r);
    for (const auto& r : rep.summary) record_row("summary", "", r);
    return c;
}

}  // namespace mahler
