#pragma once

// Seeded, splittable random streams. A stream is keyed by (seed, stream
// index); draws inside a stream are sequential splitmix64 outputs. Work that
// is sharded across threads assigns whole streams to shards, so totals are
// bit-identical no matter how many threads run them.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "numkernel.hpp"

namespace mahler::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Stream {
  public:
    Stream(std::uint64_t seed, std::uint64_t stream_index)
        : state_(mix64(mix64(seed) ^ mix64(~stream_index))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0, 1); never returns an exact endpoint.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void unit_vector(std::span<double> out) {
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (double& v : out) {
                v = normal();
                n2 += v * v;
            }
        } while (n2 < 1e-24);
        double inv = 1.0 / std::sqrt(n2);
        for (double& v : out) v *= inv;
    }

    // Uniform point in the unit ball.
    void ball_point(std::span<double> out) {
        unit_vector(out);
        double r = std::pow(uniform(), 1.0 / static_cast<double>(out.size()));
        for (double& v : out) v *= r;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Deterministic batch of unit directions, handy for containment spot checks.
inline std::vector<num::Vec> unit_directions(int dim, int count, std::uint64_t seed) {
    Stream s(seed, 0);
    std::vector<num::Vec> dirs(count, num::Vec(dim));
    for (auto& d : dirs) s.unit_vector(d);
    return dirs;
}

}  // namespace mahler::rng
