#pragma once

// Volume computation: closed forms where the body structure carries one,
// otherwise rejection sampling against an enclosing ellipsoid. Samples are
// grouped into fixed-size blocks, each drawn from a stream keyed by
// (seed, block index), and per-block hit counts are integers; totals are
// therefore bit-identical for any thread count.

#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ellipsoids.hpp"

namespace mahler {

struct VolumeEstimate {
    double value = 0.0;
    double half_width_95 = 0.0;  // 95% confidence half width; 0 for exact values
    std::string method;          // "exact" or "monte-carlo"
    long long samples = 0;
    std::uint64_t seed = 0;
    bool usable = true;  // false when no sample landed in the body
};

inline double lp_ball_volume(double p, int n) {
    if (n < 1) throw std::invalid_argument("lp_ball_volume: dimension must be positive");
    return std::exp(detail::lp_ball_log_volume(PExponent::of(p), n));
}

// Vol(A x_p B) = Vol A . Vol B / binom((n+k)/p, n/p), the fractional
// binomial taken through the gamma function; p = infinity divides by 1.
inline double product_volume(double vol_a, int n, double vol_b, int k, double p) {
    if (n < 1 || k < 1) throw std::invalid_argument("product_volume: dimensions must be positive");
    PExponent pe = PExponent::of(p);
    double denom = pe.inf ? 1.0 : num::frac_binom((n + k) / pe.p, n / pe.p);
    return vol_a * vol_b / denom;
}

inline std::optional<VolumeEstimate> volume_exact(const SymBody& k) {
    if (!k.node().exact_vol) return std::nullopt;
    VolumeEstimate est;
    est.value = *k.node().exact_vol;
    est.method = "exact";
    return est;
}

namespace detail {

constexpr long long kMcBlock = 4096;

// hits in one sample block: envelope points x = L^-T u, u uniform in the
// unit ball, tested for membership in K
inline std::uint64_t mc_block_hits(const Body& k, const Mat& chol_lower, long long total,
                                   std::uint64_t seed, long long block) {
    rng::Stream rs(seed, static_cast<std::uint64_t>(block));
    long long lo = block * kMcBlock;
    long long hi = std::min(total, lo + kMcBlock);
    Vec u(k.dim);
    std::uint64_t hits = 0;
    for (long long i = lo; i < hi; ++i) {
        rs.ball_point(u);
        Vec x = num::backward_solve(chol_lower, u);
        if (k.contains(x)) ++hits;
    }
    return hits;
}

}  // namespace detail

inline VolumeEstimate volume_mc(const SymBody& k, const Ellipsoid& envelope,
                                long long samples = 200000, std::uint64_t seed = 1,
                                int threads = 1) {
    const Body& node = k.node();
    int n = k.dim();
    if (envelope.dim() != n) throw std::invalid_argument("volume_mc: envelope dimension mismatch");
    if (samples < 1) throw std::invalid_argument("volume_mc: need at least one sample");
    threads = std::clamp(threads, 1, 64);

    // containment spot check through whichever oracle is exact (or, failing
    // both, the gauge); a violation means rejection sampling is losing mass
    if (node.gauge_exact || !node.support_exact) {
        double worst =
            detail::max_envelope_gauge_ratio(node, envelope, 1000, rng::mix64(seed ^ 0x656e76ull));
        if (worst > 1.0 + 1e-9)
            throw std::invalid_argument(
                "volume_mc: envelope does not contain the body (gauge ratio " +
                std::to_string(worst) + ")");
    } else {
        auto sr = detail::max_support_ratio(node, envelope, 1000, rng::mix64(seed ^ 0x656e76ull));
        if (sr.worst > 1.0 + 1e-9)
            throw std::invalid_argument(
                "volume_mc: envelope does not contain the body (support ratio " +
                std::to_string(sr.worst) + " at direction " + detail::format_direction(sr.dir) +
                ")");
    }

    const Mat& chol = envelope.chol_lower();
    long long nblocks = (samples + detail::kMcBlock - 1) / detail::kMcBlock;
    std::uint64_t hits = 0;
    long long first = 0;

    if (n > 8) {
        // in high dimension a loose envelope makes acceptance collapse;
        // probe a few blocks serially before committing the full budget
        long long burn = std::min<long long>(32, nblocks);
        for (long long b = 0; b < burn; ++b)
            hits += detail::mc_block_hits(node, chol, samples, seed, b);
        long long drawn = std::min(samples, burn * detail::kMcBlock);
        if (burn >= 32 && hits < static_cast<std::uint64_t>(drawn) / 1000)
            throw std::runtime_error(
                "volume_mc: acceptance below 1e-3 in " + std::to_string(n) +
                " dimensions; supply a tighter envelope or use a body with exact volume");
        first = burn;
    }

    if (threads == 1 || nblocks - first <= 1) {
        for (long long b = first; b < nblocks; ++b)
            hits += detail::mc_block_hits(node, chol, samples, seed, b);
    } else {
        std::vector<std::uint64_t> partial(threads, 0);
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t]() {
                std::uint64_t h = 0;
                for (long long b = first + t; b < nblocks; b += threads)
                    h += detail::mc_block_hits(node, chol, samples, seed, b);
                partial[t] = h;
            });
        for (auto& th : pool) th.join();
        for (std::uint64_t h : partial) hits += h;
    }

    double env_vol = envelope.volume();
    double nn = static_cast<double>(samples);
    double ph = static_cast<double>(hits) / nn;
    const double z = 1.959963984540054;  // 97.5% normal quantile
    double denom = 1.0 + z * z / nn;
    double center = (ph + z * z / (2.0 * nn)) / denom;
    double hw = z * std::sqrt(ph * (1.0 - ph) / nn + z * z / (4.0 * nn * nn)) / denom;
    double upper = std::min(1.0, center + hw);
    double lower = std::max(0.0, center - hw);

    VolumeEstimate est;
    est.value = ph * env_vol;
    est.half_width_95 = env_vol * std::max(upper - ph, ph - lower);
    est.method = "monte-carlo";
    est.samples = samples;
    est.seed = seed;
    est.usable = hits > 0;
    return est;
}

struct VolumeOptions {
    long long samples = 200000;
    std::uint64_t seed = 1;
    int threads = 1;
    std::optional<Ellipsoid> envelope;
    bool force_mc = false;
};

inline VolumeEstimate estimate_volume(const SymBody& k, const VolumeOptions& opts = {}) {
    if (!opts.force_mc && k.node().exact_vol) {
        VolumeEstimate est;
        est.value = *k.node().exact_vol;
        est.method = "exact";
        est.seed = opts.seed;
        return est;
    }
    const Ellipsoid env =
        opts.envelope ? *opts.envelope : loewner(k).ellipsoid;
    return volume_mc(k, env, opts.samples, opts.seed, opts.threads);
}

}  // namespace mahler
