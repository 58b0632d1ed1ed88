#pragma once

// Semi-implicit time stepping of
//     phi' + div(u phi) = div(m(phi) grad mu),   mu = a phi - J*phi + F'(phi),
// with the flux written as
//     m grad mu = (m a + lambda + m F2'') grad phi + m (phi grad a - (grad J)*phi).
// The diffusive coefficient is lagged and treated implicitly; the nonlocal
// remainder and the transport are explicit. The accepted update is written
// in conservative form, so the discrete mass is preserved to roundoff.

#include <chb/errors.hpp>
#include <chb/grid.hpp>
#include <chb/kernel.hpp>
#include <chb/material.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace chb {

struct ChState {
    ScalarField phi;
    double t = 0.0;
};

struct StepControl {
    double dt = 1e-3;
    double dt_min = 1e-8;
    double dt_max = 1e-2;
    double shrink_factor = 0.5;
    double guard_band = 1e-9;
    int success_streak = 0;
};

enum class Transport { Upwind, Central };

inline Transport parse_transport(std::string_view s) {
    if (s == "upwind") return Transport::Upwind;
    if (s == "central") return Transport::Central;
    throw ConfigError("unknown transport '" + std::string(s) + "' (expected upwind|central)");
}

struct StepOptions {
    Transport transport = Transport::Upwind;
    double cg_rel_tol = 1e-10;
    int cg_max_iter = 10000;
    /// Optional volumetric source S(x, t) added to the right-hand side, evaluated at t + dt.
    std::function<ScalarField(double)> source;
};

namespace detail {

/// phi - mean(phi); exactly zero for a constant field.
inline ScalarField fluctuation(const ScalarField& phi) {
    // Shifted mean: exact zero for a constant field.
    const double p0 = phi[0];
    const double c = mean(map(phi, [p0](double v) { return v - p0; }));
    return map(phi, [p0, c](double v) { return (v - p0) - c; });
}

} // namespace detail

// ---------------------------------------------------------------------------

inline ScalarField chemical_potential(const ScalarField& phi, const Kernel& kernel, const MaterialModel& model) {
    require_same_grid(phi.grid(), kernel.grid(), "chemical_potential");
    // a phi - J*phi is unchanged by shifting phi by a constant; working with the
    // fluctuation keeps constant states exactly steady under FFT rounding.
    const ScalarField a = kernel.a_field();
    const ScalarField dev = detail::fluctuation(phi);
    const ScalarField jdev = kernel.convolve(dev);
    ScalarField mu(phi.grid());
    for (std::size_t k = 0; k < phi.size(); ++k) mu[k] = a[k] * dev[k] - jdev[k] + f_prime(model, phi[k]);
    return mu;
}

/// Face flux u * phi, donor-cell or centred. Wall faces are zero.
inline StaggeredVectorField transport_flux(const ScalarField& phi, const StaggeredVectorField& u, Transport mode) {
    require_same_grid(phi.grid(), u.grid(), "transport_flux");
    const Grid2D& g = phi.grid();
    StaggeredVectorField out(g);
    auto pick = [mode](double vel, double left, double right) {
        if (mode == Transport::Central) return vel * 0.5 * (left + right);
        return vel * (vel > 0.0 ? left : right);
    };
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) out.x(i, j) = pick(u.x(i, j), phi(i - 1, j), phi(i, j));
    }
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) out.y(i, j) = pick(u.y(i, j), phi(i, j - 1), phi(i, j));
    }
    return out;
}

namespace detail {

inline void require_validated(const MaterialModel& model) {
    if (!(model.alpha1 > 0.0)) {
        throw AssumptionError("material model has no positive alpha1; run validate_assumptions first");
    }
}

inline ScalarField cell_diffusion_coefficient(const ScalarField& phi, const ScalarField& a, const MaterialModel& model) {
    ScalarField c(phi.grid());
    for (std::size_t k = 0; k < phi.size(); ++k) {
        require_interior(model, phi[k], "diffusion coefficient");
        c[k] = diffusion_coefficient(model, phi[k], a[k]);
    }
    return c;
}

inline void check_face_coefficient(const StaggeredVectorField& c, const MaterialModel& model) {
    const Grid2D& g = c.grid();
    const double floor = model.alpha1 - 1e-12;
    auto fail = [&](double v) {
        throw AssumptionError("face diffusion coefficient " + std::to_string(v) + " below alpha1 = " +
                              std::to_string(model.alpha1));
    };
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            if (!(c.x(i, j) >= floor)) fail(c.x(i, j));
        }
    }
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (!(c.y(i, j) >= floor)) fail(c.y(i, j));
        }
    }
}

/// m (phi grad a - (grad J)*phi) on faces.
inline StaggeredVectorField nonlocal_flux(const ScalarField& phi, const Kernel& kernel, const MaterialModel& model) {
    const StaggeredVectorField m_face = face_average(map(phi, [&](double r) { return mobility(model, r); }));
    const ScalarField dev = fluctuation(phi);
    StaggeredVectorField inner = hadamard(face_average(dev), kernel.grad_a());
    inner -= kernel.convolve_grad(dev);
    return hadamard(m_face, inner);
}

} // namespace detail

/// Diffusive part of m grad mu: (m a + lambda + m F2'') grad phi + m (phi grad a - (grad J)*phi).
inline StaggeredVectorField diffusive_flux(const ScalarField& phi, const Kernel& kernel, const MaterialModel& model) {
    require_same_grid(phi.grid(), kernel.grid(), "diffusive_flux");
    detail::require_validated(model);
    const StaggeredVectorField c = face_average(detail::cell_diffusion_coefficient(phi, kernel.a_field(), model));
    detail::check_face_coefficient(c, model);
    StaggeredVectorField flux = hadamard(c, grad_cc_to_face(phi));
    flux += detail::nonlocal_flux(phi, kernel, model);
    return flux;
}

/// Full face flux m grad mu - u phi.
inline StaggeredVectorField regularized_flux(const ScalarField& phi, const StaggeredVectorField& u, const Kernel& kernel,
                                             const MaterialModel& model, Transport mode = Transport::Upwind) {
    StaggeredVectorField flux = diffusive_flux(phi, kernel, model);
    flux -= transport_flux(phi, u, mode);
    return flux;
}

// ---------------------------------------------------------------------------
// Implicit operator A x = x - dt div(c grad x) with zero wall flux.

class ImplicitDiffusion {
public:
    ImplicitDiffusion(const StaggeredVectorField& face_coef, double dt) : c_(face_coef), dt_(dt) {
        const Grid2D& g = c_.grid();
        const double s = dt_ / (g.h() * g.h());
        diag_.assign(g.cells(), 1.0);
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                diag_[static_cast<std::size_t>(j) * g.nx() + i] +=
                    s * (c_.x(i, j) + c_.x(i + 1, j) + c_.y(i, j) + c_.y(i, j + 1));
            }
        }
    }

    /// div(c grad x), cellwise.
    void apply_div_c_grad(std::span<const double> x, std::span<double> out) const {
        const Grid2D& g = c_.grid();
        const int nx = g.nx(), ny = g.ny();
        const double inv_h2 = 1.0 / (g.h() * g.h());
        auto at = [&](int i, int j) { return x[static_cast<std::size_t>(j) * nx + i]; };
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const double xc = at(i, j);
                double acc = 0.0;
                if (i > 0) acc += c_.x(i, j) * (at(i - 1, j) - xc);
                if (i < nx - 1) acc += c_.x(i + 1, j) * (at(i + 1, j) - xc);
                if (j > 0) acc += c_.y(i, j) * (at(i, j - 1) - xc);
                if (j < ny - 1) acc += c_.y(i, j + 1) * (at(i, j + 1) - xc);
                out[static_cast<std::size_t>(j) * nx + i] = acc * inv_h2;
            }
        }
    }

    void apply(std::span<const double> x, std::span<double> out) const {
        apply_div_c_grad(x, out);
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] - dt_ * out[k];
    }

    [[nodiscard]] const std::vector<double>& diagonal() const noexcept { return diag_; }

private:
    StaggeredVectorField c_;
    double dt_;
    std::vector<double> diag_;
};

struct CgResult {
    int iterations = 0;
    double rel_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients; x holds the initial guess on entry.
inline CgResult pcg(const ImplicitDiffusion& op, std::span<const double> b, std::span<double> x, double rel_tol,
                    int max_iter) {
    const std::size_t n = b.size();
    const auto& d = op.diagonal();
    std::vector<double> r(n), z(n), p(n), q(n);
    auto dot = [n](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += u[k] * v[k];
        return s;
    };
    double bnorm = 0.0;
    for (double v : b) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return {};
    }
    op.apply(x, q);
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
    double rnorm = std::sqrt(dot(r, r));
    CgResult res;
    res.rel_residual = rnorm / bnorm;
    if (res.rel_residual <= rel_tol) return res;
    for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / d[k];
    p = z;
    double rz = dot(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        op.apply(p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        rnorm = std::sqrt(dot(r, r));
        res.iterations = it;
        res.rel_residual = rnorm / bnorm;
        if (res.rel_residual <= rel_tol) return res;
        for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / d[k];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    throw SolverError("CG did not reach relative residual " + std::to_string(rel_tol) + " in " +
                      std::to_string(max_iter) + " iterations (last " + std::to_string(res.rel_residual) + ")");
}

/// One IMEX Euler step of length ctl.dt. Throws GuardBandError if the new
/// iterate comes within ctl.guard_band of a pure phase.
inline ChState step(const ChState& state, const StaggeredVectorField& u, const Kernel& kernel,
                    const MaterialModel& model, const StepControl& ctl, const StepOptions& opts = {}) {
    const ScalarField& phi = state.phi;
    require_same_grid(phi.grid(), kernel.grid(), "step");
    require_same_grid(phi.grid(), u.grid(), "step");
    detail::require_validated(model);
    const double dt = ctl.dt;

    const StaggeredVectorField c = face_average(detail::cell_diffusion_coefficient(phi, kernel.a_field(), model));
    detail::check_face_coefficient(c, model);

    StaggeredVectorField explicit_flux = detail::nonlocal_flux(phi, kernel, model);
    explicit_flux -= transport_flux(phi, u, opts.transport);
    ScalarField explicit_rate = div_face_to_cc(explicit_flux);
    if (opts.source) explicit_rate += opts.source(state.t + dt);

    ScalarField rhs = phi;
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += dt * explicit_rate[k];

    const ImplicitDiffusion op(c, dt);
    ScalarField x = phi;
    pcg(op, rhs.values(), x.values(), opts.cg_rel_tol, opts.cg_max_iter);

    // Conservative reconstruction: phi^{n+1} = phi^n + dt * div(total flux).
    ScalarField implicit_rate(phi.grid());
    op.apply_div_c_grad(x.values(), implicit_rate.values());
    ChState next{phi, state.t + dt};
    const double lo = model.potential.lo() + ctl.guard_band;
    const double hi = model.potential.hi() - ctl.guard_band;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double v = phi[k] + dt * (implicit_rate[k] + explicit_rate[k]);
        if (!(v > lo && v < hi)) {
            throw GuardBandError("phi = " + std::to_string(v) + " within guard band " + std::to_string(ctl.guard_band) +
                                 " of a pure phase at t = " + std::to_string(next.t));
        }
        next.phi[k] = v;
    }
    return next;
}

enum class StepOutcome { Success, GuardBand };

inline StepControl adapt_dt(StepControl ctl, StepOutcome outcome) {
    constexpr int kGrowAfter = 10;
    if (outcome == StepOutcome::GuardBand) {
        if (ctl.dt <= ctl.dt_min * (1.0 + 1e-12)) {
            throw AbortRun("time step reached dt_min = " + std::to_string(ctl.dt_min));
        }
        ctl.dt = std::max(ctl.dt * ctl.shrink_factor, ctl.dt_min);
        ctl.success_streak = 0;
        return ctl;
    }
    if (++ctl.success_streak >= kGrowAfter) {
        ctl.dt = std::min(ctl.dt / ctl.shrink_factor, ctl.dt_max);
        ctl.success_streak = 0;
    }
    return ctl;
}

inline void validate_step_control(const StepControl& ctl) {
    if (!(ctl.dt_min > 0.0 && ctl.dt_min <= ctl.dt && ctl.dt <= ctl.dt_max)) {
        throw ConfigError("step control requires 0 < dt_min <= dt <= dt_max");
    }
    if (!(ctl.shrink_factor > 0.0 && ctl.shrink_factor < 1.0)) {
        throw ConfigError("shrink_factor must lie in (0,1)");
    }
    if (!(ctl.guard_band >= 0.0)) throw ConfigError("guard_band must be non-negative");
}

} // namespace chb
