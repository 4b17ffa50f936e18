#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "json.hpp"

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/random.hpp"
#include "flatgrav/poisson/fields.hpp"

namespace flatgrav::verify {

enum class BlobKind { gaussian, disk };

/// One mixture component: a unit-mass Gaussian (width = standard deviation)
/// or a uniform disk (width = radius), times its weight.
struct Blob {
    BlobKind kind = BlobKind::gaussian;
    double cx = 0.0, cy = 0.0;
    double width = 1.0;
    double weight = 1.0;

    double operator()(double x, double y) const {
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (kind == BlobKind::gaussian)
            return weight * std::exp(-0.5 * r2 / (width * width)) / (2.0 * std::numbers::pi * width * width);
        return r2 < width * width ? weight / (std::numbers::pi * width * width) : 0.0;
    }
    /// Radius beyond which the component is negligible.
    double reach() const { return std::hypot(cx, cy) + (kind == BlobKind::gaussian ? 4.0 : 1.0) * width; }
};

/// Mixture density, usable as an analytic function of (x, y).
struct TestDensity {
    std::vector<Blob> blobs;

    double operator()(double x, double y) const {
        double s = 0.0;
        for (const auto& b : blobs) s += b(x, y);
        return s;
    }
    double reach() const {
        double r = 0.0;
        for (const auto& b : blobs) r = std::max(r, b.reach());
        return r;
    }
    /// Sampled at cell centres and rescaled to the given discrete mass.
    poisson::PlanarField sample(int N, double h, double mass) const {
        poisson::PlanarField f = poisson::sample_planar(N, h, *this);
        const double m = poisson::mass(f);
        if (!(m > 0.0)) throw DomainError("test density has no mass on the grid");
        for (double& v : f.values) v *= mass / m;
        return f;
    }
};

/// Random mixtures of 1 to max_components Gaussians and disks with centres
/// in the middle half of a square box of side `box`.
struct FamilySpec {
    int count = 100;
    int max_components = 4;
    double mass = 1.0;
    double box = 16.0;
    int N = 128;
    double min_width = 0.3;
    double max_width = 1.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (count < 1) throw ConfigurationError("family count must be positive");
        if (max_components < 1) throw ConfigurationError("max_components must be positive");
        if (!(mass > 0.0)) throw ConfigurationError("M must be positive");
        if (!(box > 0.0)) throw ConfigurationError("box must be positive");
        if (N < 16 || (N & (N - 1)) != 0) throw ConfigurationError("grid N must be a power of two >= 16");
        if (!(min_width > 0.0) || !(max_width >= min_width)) throw ConfigurationError("invalid width range");
        if (0.25 * box + 4.0 * max_width > 0.5 * box)
            throw ConfigurationError("widths too large for the box: blobs would leave the grid");
    }
    double h() const { return box / N; }

    nlohmann::json to_json() const {
        return {{"count", count}, {"max_components", max_components}, {"mass", mass}, {"box", box}, {"N", N},
                {"min_width", min_width}, {"max_width", max_width}, {"seed", seed}};
    }
};

inline std::vector<TestDensity> make_family(const FamilySpec& spec) {
    spec.validate();
    Rng rng(spec.seed, Stream::density_family);
    std::vector<TestDensity> out(spec.count);
    const double half = 0.25 * spec.box;
    for (auto& d : out) {
        const int m = 1 + static_cast<int>(rng.uniform() * spec.max_components) % spec.max_components;
        for (int c = 0; c < m; ++c) {
            Blob b;
            b.kind = rng.uniform() < 0.5 ? BlobKind::gaussian : BlobKind::disk;
            b.cx = rng.uniform(-half, half);
            b.cy = rng.uniform(-half, half);
            b.width = rng.uniform(spec.min_width, spec.max_width);
            b.weight = rng.uniform(0.2, 1.0);
            d.blobs.push_back(b);
        }
    }
    return out;
}

}  // namespace flatgrav::verify
