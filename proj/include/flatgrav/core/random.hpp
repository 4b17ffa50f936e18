#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace flatgrav {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Named random streams derived from one top-level seed.
/// Stream s of seed S is seeded with splitmix64(S ^ splitmix64(s + 1)).
enum class Stream : std::uint64_t {
    sampling = 1,
    perturbation = 2,
    density_family = 3,
    verification = 4,
};

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed ^ splitmix64(stream + 1));
}

/// mt19937_64 with portable uniform/normal draws (the std distributions
/// are implementation-defined, which would break bit-reproducibility).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, Stream stream)
        : engine_(stream_seed(seed, static_cast<std::uint64_t>(stream))) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; caches the second variate.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    std::uint64_t bits() noexcept { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace flatgrav
