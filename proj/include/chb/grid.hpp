#pragma once

// Uniform cell-centred grid on [0,lx]x[0,ly] with a MAC (staggered) layout for
// vector fields. Scalars live at cell centres, x-components on vertical faces,
// y-components on horizontal faces:
//
//        uy(i,j+1)
//           |
//  ux(i,j) -- f(i,j) -- ux(i+1,j)
//           |
//        uy(i,j)
//
// Storage is row-major with j (the y index) as the row.

#include <chb/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace chb {

class Grid2D {
public:
    Grid2D() = default;

    Grid2D(int nx, int ny, double lx, double ly) : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
        if (nx < 4 || ny < 4) {
            throw ConfigError("grid needs at least 4 cells per axis, got " + std::to_string(nx) + "x" +
                              std::to_string(ny));
        }
        if (!(lx > 0.0) || !(ly > 0.0)) {
            throw ConfigError("grid side lengths must be positive");
        }
        const double hx = lx / nx;
        const double hy = ly / ny;
        if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy)) {
            throw ConfigError("grid cells must be square (lx/nx == ly/ny)");
        }
        h_ = hx;
    }

    [[nodiscard]] int nx() const noexcept { return nx_; }
    [[nodiscard]] int ny() const noexcept { return ny_; }
    [[nodiscard]] double lx() const noexcept { return lx_; }
    [[nodiscard]] double ly() const noexcept { return ly_; }
    [[nodiscard]] double h() const noexcept { return h_; }
    [[nodiscard]] double area() const noexcept { return lx_ * ly_; }
    [[nodiscard]] std::size_t cells() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }

    [[nodiscard]] double xc(int i) const noexcept { return (i + 0.5) * h_; }
    [[nodiscard]] double yc(int j) const noexcept { return (j + 0.5) * h_; }
    [[nodiscard]] double xf(int i) const noexcept { return i * h_; }
    [[nodiscard]] double yf(int j) const noexcept { return j * h_; }

    friend bool operator==(const Grid2D& a, const Grid2D& b) noexcept {
        return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.lx_ == b.lx_ && a.ly_ == b.ly_;
    }

private:
    int nx_ = 0;
    int ny_ = 0;
    double lx_ = 0.0;
    double ly_ = 0.0;
    double h_ = 0.0;
};

inline void require_same_grid(const Grid2D& a, const Grid2D& b, const char* where) {
    if (!(a == b)) {
        throw GridMismatch(std::string(where) + ": fields live on different grids");
    }
}

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid2D& g, double value = 0.0) : grid_(g), v_(g.cells(), value) {}

    template <class Fn>
    static ScalarField from_function(const Grid2D& g, Fn&& fn) {
        ScalarField f(g);
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                f(i, j) = fn(g.xc(i), g.yc(j));
            }
        }
        return f;
    }

    [[nodiscard]] const Grid2D& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return v_.size(); }

    double& operator()(int i, int j) noexcept { return v_[static_cast<std::size_t>(j) * grid_.nx() + i]; }
    double operator()(int i, int j) const noexcept { return v_[static_cast<std::size_t>(j) * grid_.nx() + i]; }
    double& operator[](std::size_t k) noexcept { return v_[k]; }
    double operator[](std::size_t k) const noexcept { return v_[k]; }

    [[nodiscard]] std::span<double> values() noexcept { return v_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return v_; }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
    }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "ScalarField::+=");
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "ScalarField::-=");
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
        return *this;
    }
    ScalarField& operator*=(double s) noexcept {
        for (double& x : v_) x *= s;
        return *this;
    }
    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
    friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

private:
    Grid2D grid_;
    std::vector<double> v_;
};

class StaggeredVectorField {
public:
    StaggeredVectorField() = default;
    explicit StaggeredVectorField(const Grid2D& g)
        : grid_(g),
          ux_(static_cast<std::size_t>(g.nx() + 1) * g.ny(), 0.0),
          uy_(static_cast<std::size_t>(g.nx()) * (g.ny() + 1), 0.0) {}

    [[nodiscard]] const Grid2D& grid() const noexcept { return grid_; }

    // ux: i in [0,nx], j in [0,ny); uy: i in [0,nx), j in [0,ny].
    double& x(int i, int j) noexcept { return ux_[static_cast<std::size_t>(j) * (grid_.nx() + 1) + i]; }
    double x(int i, int j) const noexcept { return ux_[static_cast<std::size_t>(j) * (grid_.nx() + 1) + i]; }
    double& y(int i, int j) noexcept { return uy_[static_cast<std::size_t>(j) * grid_.nx() + i]; }
    double y(int i, int j) const noexcept { return uy_[static_cast<std::size_t>(j) * grid_.nx() + i]; }

    [[nodiscard]] std::span<double> xs() noexcept { return ux_; }
    [[nodiscard]] std::span<const double> xs() const noexcept { return ux_; }
    [[nodiscard]] std::span<double> ys() noexcept { return uy_; }
    [[nodiscard]] std::span<const double> ys() const noexcept { return uy_; }

    /// Zero the wall-normal faces (x-faces at i=0,nx and y-faces at j=0,ny).
    void zero_boundary() noexcept {
        const int nx = grid_.nx();
        const int ny = grid_.ny();
        for (int j = 0; j < ny; ++j) {
            x(0, j) = 0.0;
            x(nx, j) = 0.0;
        }
        for (int i = 0; i < nx; ++i) {
            y(i, 0) = 0.0;
            y(i, ny) = 0.0;
        }
    }

    [[nodiscard]] double boundary_max_abs() const noexcept {
        const int nx = grid_.nx();
        const int ny = grid_.ny();
        double m = 0.0;
        for (int j = 0; j < ny; ++j) m = std::max({m, std::abs(x(0, j)), std::abs(x(nx, j))});
        for (int i = 0; i < nx; ++i) m = std::max({m, std::abs(y(i, 0)), std::abs(y(i, ny))});
        return m;
    }

    [[nodiscard]] double max_abs() const noexcept {
        double m = 0.0;
        for (double v : ux_) m = std::max(m, std::abs(v));
        for (double v : uy_) m = std::max(m, std::abs(v));
        return m;
    }

    StaggeredVectorField& operator+=(const StaggeredVectorField& o) {
        require_same_grid(grid_, o.grid_, "StaggeredVectorField::+=");
        for (std::size_t k = 0; k < ux_.size(); ++k) ux_[k] += o.ux_[k];
        for (std::size_t k = 0; k < uy_.size(); ++k) uy_[k] += o.uy_[k];
        return *this;
    }
    StaggeredVectorField& operator-=(const StaggeredVectorField& o) {
        require_same_grid(grid_, o.grid_, "StaggeredVectorField::-=");
        for (std::size_t k = 0; k < ux_.size(); ++k) ux_[k] -= o.ux_[k];
        for (std::size_t k = 0; k < uy_.size(); ++k) uy_[k] -= o.uy_[k];
        return *this;
    }
    StaggeredVectorField& operator*=(double s) noexcept {
        for (double& v : ux_) v *= s;
        for (double& v : uy_) v *= s;
        return *this;
    }
    friend StaggeredVectorField operator+(StaggeredVectorField a, const StaggeredVectorField& b) { return a += b; }
    friend StaggeredVectorField operator-(StaggeredVectorField a, const StaggeredVectorField& b) { return a -= b; }
    friend StaggeredVectorField operator*(double s, StaggeredVectorField a) { return a *= s; }

private:
    Grid2D grid_;
    std::vector<double> ux_;
    std::vector<double> uy_;
};

// ---------------------------------------------------------------------------
// Quadrature and inner products (midpoint rule, sequential summation).

inline double integrate(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    const double h = f.grid().h();
    return h * h * s;
}

inline double mean(const ScalarField& f) { return integrate(f) / f.grid().area(); }

inline double inner(const ScalarField& f, const ScalarField& g) {
    require_same_grid(f.grid(), g.grid(), "inner");
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * g[k];
    const double h = f.grid().h();
    return h * h * s;
}

inline double inner(const StaggeredVectorField& a, const StaggeredVectorField& b) {
    require_same_grid(a.grid(), b.grid(), "inner");
    double s = 0.0;
    const auto ax = a.xs(), bx = b.xs(), ay = a.ys(), by = b.ys();
    for (std::size_t k = 0; k < ax.size(); ++k) s += ax[k] * bx[k];
    for (std::size_t k = 0; k < ay.size(); ++k) s += ay[k] * by[k];
    const double h = a.grid().h();
    return h * h * s;
}

inline double l2_norm(const ScalarField& f) { return std::sqrt(inner(f, f)); }
inline double l2_norm(const StaggeredVectorField& a) { return std::sqrt(inner(a, a)); }

// ---------------------------------------------------------------------------
// Discrete calculus. Boundary faces carry zero normal flux, which is the
// homogeneous Neumann condition for scalars.

inline StaggeredVectorField grad_cc_to_face(const ScalarField& f) {
    const Grid2D& g = f.grid();
    const int nx = g.nx();
    const int ny = g.ny();
    const double inv_h = 1.0 / g.h();
    StaggeredVectorField out(g);
    for (int j = 0; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) out.x(i, j) = (f(i, j) - f(i - 1, j)) * inv_h;
    }
    for (int j = 1; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) out.y(i, j) = (f(i, j) - f(i, j - 1)) * inv_h;
    }
    return out;
}

inline ScalarField div_face_to_cc(const StaggeredVectorField& F) {
    const Grid2D& g = F.grid();
    const int nx = g.nx();
    const int ny = g.ny();
    const double inv_h = 1.0 / g.h();
    ScalarField out(g);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            out(i, j) = (F.x(i + 1, j) - F.x(i, j) + F.y(i, j + 1) - F.y(i, j)) * inv_h;
        }
    }
    return out;
}

/// Arithmetic mean of the two cells adjacent to each interior face; wall faces are zero.
inline StaggeredVectorField face_average(const ScalarField& f) {
    const Grid2D& g = f.grid();
    const int nx = g.nx();
    const int ny = g.ny();
    StaggeredVectorField out(g);
    for (int j = 0; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) out.x(i, j) = 0.5 * (f(i, j) + f(i - 1, j));
    }
    for (int j = 1; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) out.y(i, j) = 0.5 * (f(i, j) + f(i, j - 1));
    }
    return out;
}

/// Facewise product a*b.
inline StaggeredVectorField hadamard(const StaggeredVectorField& a, const StaggeredVectorField& b) {
    require_same_grid(a.grid(), b.grid(), "hadamard");
    StaggeredVectorField out(a.grid());
    const auto ax = a.xs(), bx = b.xs(), ay = a.ys(), by = b.ys();
    auto ox = out.xs();
    auto oy = out.ys();
    for (std::size_t k = 0; k < ax.size(); ++k) ox[k] = ax[k] * bx[k];
    for (std::size_t k = 0; k < ay.size(); ++k) oy[k] = ay[k] * by[k];
    return out;
}

/// Sample a vector function at face centres. Wall faces are left at zero.
template <class FnX, class FnY>
StaggeredVectorField sample_faces(const Grid2D& g, FnX&& fx, FnY&& fy) {
    StaggeredVectorField out(g);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) out.x(i, j) = fx(g.xf(i), g.yc(j));
    }
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) out.y(i, j) = fy(g.xc(i), g.yf(j));
    }
    return out;
}

/// Cellwise map.
template <class Fn>
ScalarField map(const ScalarField& f, Fn&& fn) {
    ScalarField out(f.grid());
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = fn(f[k]);
    return out;
}

struct Norms {
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
    double h1semi = 0.0;
};

inline Norms norms(const ScalarField& f) {
    Norms n;
    double s1 = 0.0;
    double s2 = 0.0;
    for (double v : f.values()) {
        s1 += std::abs(v);
        s2 += v * v;
        n.linf = std::max(n.linf, std::abs(v));
    }
    const double h2 = f.grid().h() * f.grid().h();
    n.l1 = h2 * s1;
    n.l2 = std::sqrt(h2 * s2);
    n.h1semi = l2_norm(grad_cc_to_face(f));
    return n;
}

inline double max_abs(const ScalarField& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

} // namespace chb
