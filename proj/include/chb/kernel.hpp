#pragma once

// Interaction kernel J sampled at all grid offsets, and the Omega-restricted
// convolutions (J*phi)(x_c) = h^2 sum_{c'} J(x_c - x_c') phi(x_c') computed by
// zero-padded FFT. Padding to (2nx)x(2ny) makes the circular FFT convolution
// equal to the linear one, so nothing wraps around the box.

#include <chb/errors.hpp>
#include <chb/grid.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace chb {

enum class KernelShape { Gaussian, Bump };

inline KernelShape parse_kernel_shape(std::string_view s) {
    if (s == "gaussian") return KernelShape::Gaussian;
    if (s == "bump") return KernelShape::Bump;
    throw ConfigError("unknown kernel '" + std::string(s) + "' (expected gaussian|bump)");
}

namespace detail {

// FFTW's planner is not thread-safe; execution with the new-array API is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

template <class T>
struct FftwFree {
    void operator()(T* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree<double>>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree<fftw_complex>>;

inline RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
inline ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

/// Forward/backward 2D real FFT plans for a (py x px) row-major array.
class PaddedFft {
public:
    PaddedFft(int px, int py) : px_(px), py_(py) {
        auto in = alloc_real(real_size());
        auto out = alloc_complex(complex_size());
        std::lock_guard lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(py_, px_, in.get(), out.get(), FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(py_, px_, out.get(), in.get(), FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw SolverError("FFTW planning failed");
    }
    PaddedFft(const PaddedFft&) = delete;
    PaddedFft& operator=(const PaddedFft&) = delete;
    ~PaddedFft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    [[nodiscard]] int px() const noexcept { return px_; }
    [[nodiscard]] int py() const noexcept { return py_; }
    [[nodiscard]] std::size_t real_size() const noexcept { return static_cast<std::size_t>(px_) * py_; }
    [[nodiscard]] std::size_t complex_size() const noexcept { return static_cast<std::size_t>(px_ / 2 + 1) * py_; }

    void forward(double* in, fftw_complex* out) const noexcept { fftw_execute_dft_r2c(fwd_, in, out); }
    // c2r destroys its input.
    void backward(fftw_complex* in, double* out) const noexcept { fftw_execute_dft_c2r(bwd_, in, out); }

private:
    int px_;
    int py_;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

} // namespace detail

/// Cell-centred results of one forward transform: J*phi and (dJ/dx)*phi, (dJ/dy)*phi.
struct Convolutions {
    ScalarField conv;
    ScalarField grad_x;
    ScalarField grad_y;
};

class Kernel {
public:
    /// Offsets run over i in [-(nx-1), nx-1], j in [-(ny-1), ny-1].
    [[nodiscard]] double sample(int i, int j) const noexcept { return samples_[offset_index(i, j)]; }
    [[nodiscard]] double grad_sample_x(int i, int j) const noexcept { return gx_[offset_index(i, j)]; }
    [[nodiscard]] double grad_sample_y(int i, int j) const noexcept { return gy_[offset_index(i, j)]; }

    [[nodiscard]] const Grid2D& grid() const noexcept { return grid_; }
    [[nodiscard]] KernelShape shape() const noexcept { return shape_; }
    [[nodiscard]] double amplitude() const noexcept { return amplitude_; }
    [[nodiscard]] double eps() const noexcept { return eps_; }
    /// Quadrature of the integral of |J| over all sampled offsets.
    [[nodiscard]] double l1_norm() const noexcept { return l1_norm_; }
    /// Estimate of b = sup_x int_Omega |grad J(x-y)| dy (quadrature; not a proof).
    [[nodiscard]] double grad_l1_norm() const noexcept { return grad_l1_norm_; }

    /// a(x) = int_Omega J(x-y) dy at cell centres.
    [[nodiscard]] ScalarField a_field() const {
        for (double v : a_.values()) {
            if (v < -1e-12) throw AssumptionError("kernel field a(x) is negative somewhere");
        }
        return a_;
    }
    /// grad a sampled on faces, computed as (grad J) * 1.
    [[nodiscard]] const StaggeredVectorField& grad_a() const noexcept { return grad_a_; }
    [[nodiscard]] double grad_a_sup() const noexcept { return grad_a_.max_abs(); }

    [[nodiscard]] ScalarField convolve(const ScalarField& phi) const {
        require_same_grid(grid_, phi.grid(), "Kernel::convolve");
        if (amplitude_ == 0.0) return ScalarField(grid_);
        auto spec = forward(phi);
        return backward(spec.get(), spec_j_.get());
    }

    [[nodiscard]] Convolutions convolve_all(const ScalarField& phi) const {
        require_same_grid(grid_, phi.grid(), "Kernel::convolve_all");
        if (amplitude_ == 0.0) return {ScalarField(grid_), ScalarField(grid_), ScalarField(grid_)};
        auto spec = forward(phi);
        return {backward(spec.get(), spec_j_.get()), backward(spec.get(), spec_gx_.get()),
                backward(spec.get(), spec_gy_.get())};
    }

    /// (grad J)*phi interpolated to interior faces by averaging the adjacent
    /// cell values. Wall faces are zero (they carry no flux).
    [[nodiscard]] StaggeredVectorField convolve_grad(const ScalarField& phi) const {
        require_same_grid(grid_, phi.grid(), "Kernel::convolve_grad");
        if (amplitude_ == 0.0) return StaggeredVectorField(grid_);
        auto spec = forward(phi);
        return to_faces(backward(spec.get(), spec_gx_.get()), backward(spec.get(), spec_gy_.get()));
    }

    [[nodiscard]] static StaggeredVectorField to_faces(const ScalarField& cx, const ScalarField& cy) {
        const Grid2D& g = cx.grid();
        StaggeredVectorField out(g);
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 1; i < g.nx(); ++i) out.x(i, j) = 0.5 * (cx(i, j) + cx(i - 1, j));
        }
        for (int j = 1; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) out.y(i, j) = 0.5 * (cy(i, j) + cy(i, j - 1));
        }
        return out;
    }

    template <class Profile>
    friend Kernel make_kernel(const Grid2D& grid, KernelShape shape, double amplitude, double eps, Profile&& profile);

private:
    Kernel() = default;

    [[nodiscard]] std::size_t offset_index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j + grid_.ny() - 1) * (2 * grid_.nx() - 1) + (i + grid_.nx() - 1);
    }

    // Transform of the offset samples laid out circularly in the padded box.
    [[nodiscard]] detail::ComplexBuffer transform_samples(const std::vector<double>& s) const {
        const int nx = grid_.nx(), ny = grid_.ny();
        const int px = fft_->px(), py = fft_->py();
        auto in = detail::alloc_real(fft_->real_size());
        std::fill_n(in.get(), fft_->real_size(), 0.0);
        for (int j = -(ny - 1); j <= ny - 1; ++j) {
            for (int i = -(nx - 1); i <= nx - 1; ++i) {
                const int ii = (i + px) % px;
                const int jj = (j + py) % py;
                in[static_cast<std::size_t>(jj) * px + ii] = s[offset_index(i, j)];
            }
        }
        auto out = detail::alloc_complex(fft_->complex_size());
        fft_->forward(in.get(), out.get());
        return out;
    }

    [[nodiscard]] detail::ComplexBuffer forward(const ScalarField& phi) const {
        const int nx = grid_.nx(), ny = grid_.ny(), px = fft_->px();
        auto in = detail::alloc_real(fft_->real_size());
        std::fill_n(in.get(), fft_->real_size(), 0.0);
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) in[static_cast<std::size_t>(j) * px + i] = phi(i, j);
        }
        auto out = detail::alloc_complex(fft_->complex_size());
        fft_->forward(in.get(), out.get());
        return out;
    }

    [[nodiscard]] ScalarField backward(const fftw_complex* spec, const fftw_complex* kernel_spec) const {
        const std::size_t nc = fft_->complex_size();
        auto prod = detail::alloc_complex(nc);
        for (std::size_t k = 0; k < nc; ++k) {
            const double ar = spec[k][0], ai = spec[k][1];
            const double br = kernel_spec[k][0], bi = kernel_spec[k][1];
            prod[k][0] = ar * br - ai * bi;
            prod[k][1] = ar * bi + ai * br;
        }
        auto out = detail::alloc_real(fft_->real_size());
        fft_->backward(prod.get(), out.get());
        const double h = grid_.h();
        const double scale = h * h / static_cast<double>(fft_->real_size());
        ScalarField f(grid_);
        const int px = fft_->px();
        for (int j = 0; j < grid_.ny(); ++j) {
            for (int i = 0; i < grid_.nx(); ++i) f(i, j) = scale * out[static_cast<std::size_t>(j) * px + i];
        }
        return f;
    }

    Grid2D grid_;
    KernelShape shape_ = KernelShape::Gaussian;
    double amplitude_ = 0.0;
    double eps_ = 1.0;
    std::vector<double> samples_;
    std::vector<double> gx_;
    std::vector<double> gy_;
    double l1_norm_ = 0.0;
    double grad_l1_norm_ = 0.0;
    std::shared_ptr<const detail::PaddedFft> fft_;
    std::shared_ptr<const fftw_complex[]> spec_j_;
    std::shared_ptr<const fftw_complex[]> spec_gx_;
    std::shared_ptr<const fftw_complex[]> spec_gy_;
    ScalarField a_;
    StaggeredVectorField grad_a_;
};

/// Builds a kernel from a radial profile: profile(r2) returns {J, dJ/d(r2)}.
template <class Profile>
Kernel make_kernel(const Grid2D& grid, KernelShape shape, double amplitude, double eps, Profile&& profile) {
    if (!(eps > 0.0)) throw ConfigError("kernel eps must be positive");
    if (!(amplitude >= 0.0)) throw ConfigError("kernel amplitude must be non-negative");
    Kernel k;
    k.grid_ = grid;
    k.shape_ = shape;
    k.amplitude_ = amplitude;
    k.eps_ = eps;
    const int nx = grid.nx(), ny = grid.ny();
    const std::size_t n_off = static_cast<std::size_t>(2 * nx - 1) * (2 * ny - 1);
    k.samples_.assign(n_off, 0.0);
    k.gx_.assign(n_off, 0.0);
    k.gy_.assign(n_off, 0.0);
    const double h = grid.h();
    double l1 = 0.0;
    std::vector<double> abs_grad(n_off, 0.0);
    for (int j = -(ny - 1); j <= ny - 1; ++j) {
        for (int i = -(nx - 1); i <= nx - 1; ++i) {
            const double zx = i * h, zy = j * h;
            const auto [val, dval] = profile(zx * zx + zy * zy);
            const std::size_t idx = k.offset_index(i, j);
            k.samples_[idx] = amplitude * val;
            // grad J = 2 z dJ/d(r2)
            k.gx_[idx] = amplitude * 2.0 * zx * dval;
            k.gy_[idx] = amplitude * 2.0 * zy * dval;
            l1 += std::abs(k.samples_[idx]);
            abs_grad[idx] = std::hypot(k.gx_[idx], k.gy_[idx]);
        }
    }
    k.l1_norm_ = h * h * l1;
    k.fft_ = std::make_shared<const detail::PaddedFft>(2 * nx, 2 * ny);
    k.spec_j_ = k.transform_samples(k.samples_);
    k.spec_gx_ = k.transform_samples(k.gx_);
    k.spec_gy_ = k.transform_samples(k.gy_);

    const ScalarField ones(grid, 1.0);
    k.a_ = k.convolve(ones);
    k.grad_a_ = k.convolve_grad(ones);

    // sup over cells of h^2 sum_y |grad J(x - y)|, via one more padded convolution.
    auto spec_abs = k.transform_samples(abs_grad);
    auto spec_one = k.forward(ones);
    const ScalarField b_field = k.backward(spec_one.get(), spec_abs.get());
    k.grad_l1_norm_ = 0.0;
    for (double v : b_field.values()) k.grad_l1_norm_ = std::max(k.grad_l1_norm_, v);
    return k;
}

/// J(z) = amplitude * exp(-|z|^2 / eps^2).
inline Kernel build_gaussian(const Grid2D& grid, double amplitude, double eps) {
    const double inv_e2 = 1.0 / (eps * eps);
    return make_kernel(grid, KernelShape::Gaussian, amplitude, eps, [inv_e2](double r2) {
        const double v = std::exp(-r2 * inv_e2);
        return std::pair{v, -inv_e2 * v};
    });
}

/// Compactly supported C-infinity bump, J(0) = amplitude, support |z| < eps.
inline Kernel build_bump(const Grid2D& grid, double amplitude, double eps) {
    const double inv_e2 = 1.0 / (eps * eps);
    return make_kernel(grid, KernelShape::Bump, amplitude, eps, [inv_e2](double r2) {
        const double s = r2 * inv_e2;
        if (s >= 1.0) return std::pair{0.0, 0.0};
        const double q = 1.0 - s;
        const double v = std::exp(1.0 - 1.0 / q);
        return std::pair{v, -v * inv_e2 / (q * q)};
    });
}

inline Kernel build_kernel(const Grid2D& grid, KernelShape shape, double amplitude, double eps) {
    return shape == KernelShape::Gaussian ? build_gaussian(grid, amplitude, eps) : build_bump(grid, amplitude, eps);
}

} // namespace chb
