#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "flatgrav/core/error.hpp"
#include "flatgrav/poisson/fields.hpp"

namespace flatgrav::io {

namespace detail {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
}

template <class T>
void put(std::ostream& out, T v) {
    const T le = to_little(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated binary file");
    return to_little(v);
}

inline void put_magic(std::ostream& out, const char* tag) {
    std::array<char, 8> m{};
    std::memcpy(m.data(), tag, std::strlen(tag));
    out.write(m.data(), 8);
}

inline void expect_magic(std::istream& in, const char* tag) {
    std::array<char, 8> m{}, want{};
    std::memcpy(want.data(), tag, std::strlen(tag));
    in.read(m.data(), 8);
    if (!in || m != want) throw IoError(std::string("bad magic, expected ") + tag);
}

}  // namespace detail

/// FGRID1: magic[8], uint64 N, float64 h, float64 mass, then N*N float64
/// row-major, all little-endian.
inline void write_grid(std::ostream& out, const poisson::PlanarField& f) {
    detail::put_magic(out, "FGRID1");
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(f.N));
    detail::put<double>(out, f.h);
    detail::put<double>(out, poisson::mass(f));
    for (double v : f.values) detail::put<double>(out, v);
}

inline poisson::PlanarField read_grid(std::istream& in) {
    detail::expect_magic(in, "FGRID1");
    const auto n = detail::get<std::uint64_t>(in);
    const double h = detail::get<double>(in);
    (void)detail::get<double>(in);
    if (n == 0 || n > (1u << 16)) throw IoError("implausible grid size in FGRID1 header");
    poisson::PlanarField f(static_cast<int>(n), h);
    for (double& v : f.values) v = detail::get<double>(in);
    return f;
}

inline void save_grid(const std::string& path, const poisson::PlanarField& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_grid(out, f);
    if (!out) throw IoError("write failed for " + path);
}

inline poisson::PlanarField load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_grid(in);
}

/// Equal-weight particle set in the plane.
struct ParticleArrays {
    std::vector<double> x, y, vx, vy;
    double weight = 0.0;
    std::size_t size() const noexcept { return x.size(); }
};

/// FPART1: magic[8], uint64 Np, float64 weight, then x, y, vx, vy per particle.
inline void write_particles(std::ostream& out, const ParticleArrays& p) {
    detail::put_magic(out, "FPART1");
    detail::put<std::uint64_t>(out, p.size());
    detail::put<double>(out, p.weight);
    for (std::size_t k = 0; k < p.size(); ++k) {
        detail::put<double>(out, p.x[k]);
        detail::put<double>(out, p.y[k]);
        detail::put<double>(out, p.vx[k]);
        detail::put<double>(out, p.vy[k]);
    }
}

inline ParticleArrays read_particles(std::istream& in) {
    detail::expect_magic(in, "FPART1");
    const auto n = detail::get<std::uint64_t>(in);
    ParticleArrays p;
    p.weight = detail::get<double>(in);
    p.x.resize(n);
    p.y.resize(n);
    p.vx.resize(n);
    p.vy.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        p.x[k] = detail::get<double>(in);
        p.y[k] = detail::get<double>(in);
        p.vx[k] = detail::get<double>(in);
        p.vy[k] = detail::get<double>(in);
    }
    return p;
}

}  // namespace flatgrav::io
