#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include "flatgrav/core/error.hpp"
#include "flatgrav/core/quadrature.hpp"
#include "flatgrav/poisson/fields.hpp"

namespace flatgrav::poisson {

namespace detail {

/// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

/// Owns a pair of 2D real <-> complex plans on an n x n grid.
class RealFft2d {
public:
    explicit RealFft2d(int n)
        : n_(n),
          real_(fftw_buffer<double>(static_cast<std::size_t>(n) * n)),
          spec_(fftw_buffer<fftw_complex>(static_cast<std::size_t>(n) * (n / 2 + 1))) {
        std::lock_guard lock(fftw_planner_mutex());
        forward_ = fftw_plan_dft_r2c_2d(n, n, real_.get(), spec_.get(), FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_2d(n, n, spec_.get(), real_.get(), FFTW_ESTIMATE);
        if (!forward_ || !backward_) throw Error("FFTW plan creation failed");
    }
    RealFft2d(const RealFft2d&) = delete;
    RealFft2d& operator=(const RealFft2d&) = delete;
    ~RealFft2d() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    int size() const noexcept { return n_; }
    std::size_t spectral_size() const noexcept { return static_cast<std::size_t>(n_) * (n_ / 2 + 1); }
    double* real() noexcept { return real_.get(); }
    std::complex<double>* spectrum() noexcept { return reinterpret_cast<std::complex<double>*>(spec_.get()); }
    void forward() noexcept { fftw_execute(forward_); }
    /// Unnormalized inverse; divide by n^2.
    void backward() noexcept { fftw_execute(backward_); }

private:
    int n_;
    FftwBuffer<double> real_;
    FftwBuffer<fftw_complex> spec_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// int_0^x int_0^y 1/sqrt(u^2+v^2) dv du for x, y >= 0.
inline double inv_distance_primitive(double x, double y) {
    double s = 0.0;
    if (x > 0.0 && y > 0.0) s = x * std::asinh(y / x) + y * std::asinh(x / y);
    return s;
}

inline double signed_primitive(double x, double y) {
    const double sx = x < 0 ? -1.0 : 1.0, sy = y < 0 ? -1.0 : 1.0;
    return sx * sy * inv_distance_primitive(std::abs(x), std::abs(y));
}

}  // namespace detail

/// Mean of 1/|x| over the unit cell centered at the integer offset (m, n).
inline double cell_mean_inverse_distance(int m, int n) {
    // canonical octant so that the table is exactly symmetric
    m = std::abs(m);
    n = std::abs(n);
    if (n > m) std::swap(m, n);
    const double d2 = static_cast<double>(m) * m + static_cast<double>(n) * n;
    if (d2 > 64.0 * 64.0) {
        const double d = std::sqrt(d2);
        return 1.0 / d + 1.0 / (24.0 * d * d * d);
    }
    const double x1 = m - 0.5, x2 = m + 0.5, y1 = n - 0.5, y2 = n + 0.5;
    using detail::signed_primitive;
    return signed_primitive(x2, y2) - signed_primitive(x1, y2) - signed_primitive(x2, y1) + signed_primitive(x1, y1);
}

/// Discrete kernel for U = -rho * 1/|x| on a zero-padded (2N)^2 grid, in
/// units of 1/h. Entries are cell means of 1/|x|, convolved with the
/// stencil 1 - h^2 Lap_h / 24 that turns cell-center samples into cell
/// averages to the next order.
class PotKernelTable {
public:
    /// Kernel on a periodic P x P grid (default P = 2N) holding offsets up to P/2.
    explicit PotKernelTable(int N, int P = 0)
        : N_(N), P_(P > 0 ? P : 2 * N), values_(static_cast<std::size_t>(P_) * P_) {
        auto mean = [](int m, int n) { return cell_mean_inverse_distance(m, n); };
        const int half = P_ / 2;
        for (int i = 0; i < P_; ++i) {
            const int n = i <= half ? i : i - P_;
            for (int j = 0; j < P_; ++j) {
                const int m = j <= half ? j : j - P_;
                const double c = mean(m, n);
                const double lap = mean(m + 1, n) + mean(m - 1, n) + mean(m, n + 1) + mean(m, n - 1) - 4.0 * c;
                values_[static_cast<std::size_t>(i) * P_ + j] = c - lap / 24.0;
            }
        }
    }

    int N() const noexcept { return N_; }
    int padded() const noexcept { return P_; }
    /// Kernel at the signed offset (m, n), |m|, |n| <= P/2.
    double at(int m, int n) const {
        const int j = m < 0 ? m + P_ : m, i = n < 0 ? n + P_ : n;
        return values_[static_cast<std::size_t>(i) * P_ + j];
    }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    int N_, P_;
    std::vector<double> values_;
};

/// Vector field on a planar grid.
struct VectorField {
    PlanarField x;
    PlanarField y;
};

/// Isolated-boundary Poisson solver for a fixed grid (N, h). Reusable and
/// safe to share between threads only if calls are serialized.
class PlanarPoissonSolver {
public:
    PlanarPoissonSolver(int N, double h) : N_(N), h_(h), fft_(2 * N) {
        if (N < 4 || (N & (N - 1)) != 0) throw ShapeError("planar grid size must be a power of two");
        const PotKernelTable table(N);
        std::copy(table.values().begin(), table.values().end(), fft_.real());
        fft_.forward();
        kernel_hat_.assign(fft_.spectrum(), fft_.spectrum() + fft_.spectral_size());
    }

    int N() const noexcept { return N_; }
    double h() const noexcept { return h_; }

    /// Throws BoxError unless N h >= 4 x the support extent.
    void check_box(const PlanarField& rho) const {
        const double diam = support_diameter(rho);
        if (rho.box_size() < 4.0 * diam)
            throw BoxError("support extent " + std::to_string(diam) + " too large for box " +
                           std::to_string(rho.box_size()) + " (needs a factor 4)");
    }

    PlanarField potential(const PlanarField& rho, bool check = true) {
        if (rho.N != N_ || rho.h != h_) throw ShapeError("density grid does not match the solver");
        if (check) check_box(rho);
        const int P = 2 * N_;
        double* buf = fft_.real();
        std::fill(buf, buf + static_cast<std::size_t>(P) * P, 0.0);
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) buf[static_cast<std::size_t>(i) * P + j] = rho(i, j);
        fft_.forward();
        std::complex<double>* s = fft_.spectrum();
        for (std::size_t k = 0; k < kernel_hat_.size(); ++k) s[k] *= kernel_hat_[k];
        fft_.backward();
        // h^2 cell area times 1/h kernel units, over the FFT normalization
        const double scale = -h_ / (static_cast<double>(P) * P);
        PlanarField u(N_, h_);
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) u(i, j) = scale * buf[static_cast<std::size_t>(i) * P + j];
        return u;
    }

    const std::vector<std::complex<double>>& kernel_spectrum() const noexcept { return kernel_hat_; }

private:
    int N_;
    double h_;
    detail::RealFft2d fft_;
    std::vector<std::complex<double>> kernel_hat_;
};

inline PlanarField potential_fft(const PlanarField& rho) {
    PlanarPoissonSolver solver(rho.N, rho.h);
    return solver.potential(rho);
}

/// -1/2 h^2 sum U_rho sigma.
inline double pot_inner_with(const PlanarField& u_rho, const PlanarField& sigma) {
    require_same_grid(u_rho, sigma);
    CompensatedSum s;
    for (std::size_t k = 0; k < sigma.values.size(); ++k) s.add(u_rho.values[k] * sigma.values[k]);
    return -0.5 * sigma.h * sigma.h * s.value();
}

inline double pot_inner(const PlanarField& rho, const PlanarField& sigma) {
    require_same_grid(rho, sigma);
    return pot_inner_with(potential_fft(rho), sigma);
}

inline double e_pot(const PlanarField& rho) { return -pot_inner(rho, rho); }

inline double pot_norm(const PlanarField& rho) { return std::sqrt(std::max(0.0, pot_inner(rho, rho))); }

/// -grad U by fourth-order central differences; second-order one-sided
/// differences in the two outermost cells.
inline VectorField force_field(const PlanarField& u) {
    const int N = u.N;
    const double h = u.h;
    VectorField f{PlanarField(N, h), PlanarField(N, h)};
    auto deriv = [&](auto get, int k) {
        if (k >= 2 && k < N - 2) return (-get(k + 2) + 8.0 * get(k + 1) - 8.0 * get(k - 1) + get(k - 2)) / (12.0 * h);
        if (k < 2) return (-3.0 * get(k) + 4.0 * get(k + 1) - get(k + 2)) / (2.0 * h);
        return (3.0 * get(k) - 4.0 * get(k - 1) + get(k - 2)) / (2.0 * h);
    };
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            f.x(i, j) = -deriv([&](int k) { return u(i, k); }, j);
            f.y(i, j) = -deriv([&](int k) { return u(k, j); }, i);
        }
    return f;
}

}  // namespace flatgrav::poisson
