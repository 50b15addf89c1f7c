#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fbsc {

/// splitmix64 step, used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Seed for the substream identified by (seed, stream). Distinct streams
/// (e.g. Monte Carlo paths) get decorrelated generators deterministically.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (stream * 0x9e3779b97f4a7c15ull + 0x3c6ef372fe94f82bull);
    return splitmix64(s);
}

/// Deterministic random source. Normals come from a hand-rolled Box-Muller
/// so the draw sequence depends only on the mt19937_64 stream, not on the
/// standard library's distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        return (engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t next_raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fbsc
