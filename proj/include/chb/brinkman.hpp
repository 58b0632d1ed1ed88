#pragma once

// Steady variable-viscosity Brinkman problem on the MAC grid
//     -div(nu grad u) + eta u + grad pi = f,   div u = 0,   u = 0 on the walls.
//
// The velocity block A is assembled from its energy form, so it is symmetric
// positive definite by construction, and factorised once per distinct
// (nu, eta). The pressure is found by Uzawa iteration accelerated with
// conjugate gradients on the Schur complement D A^-1 D^T, preconditioned by
// rho = mean(nu).

#include <chb/errors.hpp>
#include <chb/grid.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chb {

enum class ViscousForm { DivGrad, SymGrad };

inline ViscousForm parse_viscous_form(std::string_view s) {
    if (s == "divgrad") return ViscousForm::DivGrad;
    if (s == "symgrad") return ViscousForm::SymGrad;
    throw ConfigError("unknown viscous_form '" + std::string(s) + "' (expected divgrad|symgrad)");
}

struct BrinkmanProblem {
    ScalarField nu;
    ScalarField eta;
    StaggeredVectorField force;
};

struct FlowSolution {
    StaggeredVectorField u;
    ScalarField pi;
    double residual = 0.0; // max-norm momentum residual
    double div_max = 0.0;  // max-norm discrete divergence
    int iterations = 0;
};

struct BrinkmanOptions {
    double tol = 1e-8;
    int max_iter = 500;
    ViscousForm form = ViscousForm::DivGrad;
    /// Uzawa step / pressure preconditioner; <= 0 selects mean(nu).
    double rho = 0.0;
};

/// nu(s) = nu0 + (nu1 - nu0) (1 + clamp(s,-1,1)) / 2.
inline ScalarField viscosity_of_phi(const ScalarField& phi, double nu0, double nu1) {
    if (!(nu0 > 0.0)) throw ConfigError("nu0 must be positive");
    if (!(nu1 >= nu0)) throw ConfigError("nu1 must be >= nu0");
    return map(phi, [&](double s) { return nu0 + (nu1 - nu0) * 0.5 * (1.0 + std::clamp(s, -1.0, 1.0)); });
}

/// faceavg(mu) grad phi + h on interior faces.
inline StaggeredVectorField assemble_forcing(const ScalarField& mu, const ScalarField& phi,
                                             const StaggeredVectorField& h) {
    require_same_grid(mu.grid(), phi.grid(), "assemble_forcing");
    require_same_grid(mu.grid(), h.grid(), "assemble_forcing");
    StaggeredVectorField f = hadamard(face_average(mu), grad_cc_to_face(phi));
    f += h;
    f.zero_boundary();
    return f;
}

enum class BodyForce { Zero, Constant, Vortex };

inline BodyForce parse_body_force(std::string_view s) {
    if (s == "zero") return BodyForce::Zero;
    if (s == "constant") return BodyForce::Constant;
    if (s == "vortex") return BodyForce::Vortex;
    throw ConfigError("unknown body_force '" + std::string(s) + "' (expected zero|constant|vortex)");
}

/// Body force presets. `vortex` is amp * curl(sin^2(pi x/lx) sin^2(pi y/ly)),
/// divergence-free and vanishing on the walls.
inline StaggeredVectorField body_force(const Grid2D& g, BodyForce kind, double amp, double fx, double fy) {
    using std::numbers::pi;
    switch (kind) {
    case BodyForce::Zero: return StaggeredVectorField(g);
    case BodyForce::Constant:
        return sample_faces(g, [&](double, double) { return fx; }, [&](double, double) { return fy; });
    case BodyForce::Vortex: {
        const double kx = pi / g.lx(), ky = pi / g.ly();
        return sample_faces(
            g,
            [&](double x, double y) {
                const double sx = std::sin(kx * x);
                return amp * sx * sx * ky * std::sin(2.0 * ky * y);
            },
            [&](double x, double y) {
                const double sy = std::sin(ky * y);
                return -amp * kx * std::sin(2.0 * kx * x) * sy * sy;
            });
    }
    }
    return StaggeredVectorField(g);
}

// ---------------------------------------------------------------------------
// Unknown numbering and the viscous energy terms.

class MacLayout {
public:
    explicit MacLayout(const Grid2D& g) : g_(g) {}

    [[nodiscard]] int nux() const noexcept { return (g_.nx() - 1) * g_.ny(); }
    [[nodiscard]] int nuy() const noexcept { return g_.nx() * (g_.ny() - 1); }
    [[nodiscard]] int size() const noexcept { return nux() + nuy(); }
    /// Interior x-face (i in [1,nx-1], j in [0,ny-1]).
    [[nodiscard]] int ux(int i, int j) const noexcept { return j * (g_.nx() - 1) + (i - 1); }
    /// Interior y-face (i in [0,nx-1], j in [1,ny-1]).
    [[nodiscard]] int uy(int i, int j) const noexcept { return nux() + (j - 1) * g_.nx() + i; }

    [[nodiscard]] Eigen::VectorXd pack(const StaggeredVectorField& f) const {
        Eigen::VectorXd v(size());
        for (int j = 0; j < g_.ny(); ++j) {
            for (int i = 1; i < g_.nx(); ++i) v[ux(i, j)] = f.x(i, j);
        }
        for (int j = 1; j < g_.ny(); ++j) {
            for (int i = 0; i < g_.nx(); ++i) v[uy(i, j)] = f.y(i, j);
        }
        return v;
    }

    [[nodiscard]] StaggeredVectorField unpack(const Eigen::VectorXd& v) const {
        StaggeredVectorField f(g_);
        for (int j = 0; j < g_.ny(); ++j) {
            for (int i = 1; i < g_.nx(); ++i) f.x(i, j) = v[ux(i, j)];
        }
        for (int j = 1; j < g_.ny(); ++j) {
            for (int i = 0; i < g_.nx(); ++i) f.y(i, j) = v[uy(i, j)];
        }
        return f;
    }

private:
    Grid2D g_;
};

struct EnergyEntry {
    int dof;
    double coef; // multiplies the unknown; units 1/h
};

/// Calls term(weight, entries, count) for every quadratic term
///     weight * (sum_k coef_k u_{dof_k})^2
/// of the discrete viscous energy (per unit area). Wall nodes use the
/// half-cell distance to the wall and carry half weight.
template <class Term>
void for_each_viscous_term(const Grid2D& g, const ScalarField& nu, ViscousForm form, Term&& term) {
    const MacLayout L(g);
    const int nx = g.nx(), ny = g.ny();
    const double ih = 1.0 / g.h();
    const double normal_factor = form == ViscousForm::SymGrad ? 2.0 : 1.0;
    EnergyEntry e[4];

    // Normal strains at cell centres.
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double w = normal_factor * nu(i, j);
            int n = 0;
            if (i + 1 <= nx - 1) e[n++] = {L.ux(i + 1, j), ih};
            if (i >= 1) e[n++] = {L.ux(i, j), -ih};
            if (n) term(w, e, n);
            n = 0;
            if (j + 1 <= ny - 1) e[n++] = {L.uy(i, j + 1), ih};
            if (j >= 1) e[n++] = {L.uy(i, j), -ih};
            if (n) term(w, e, n);
        }
    }

    // Shear at interior nodes.
    for (int j = 1; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) {
            const double w = 0.25 * (nu(i - 1, j - 1) + nu(i, j - 1) + nu(i - 1, j) + nu(i, j));
            if (form == ViscousForm::DivGrad) {
                e[0] = {L.ux(i, j), ih};
                e[1] = {L.ux(i, j - 1), -ih};
                term(w, e, 2);
                e[0] = {L.uy(i, j), ih};
                e[1] = {L.uy(i - 1, j), -ih};
                term(w, e, 2);
            } else {
                e[0] = {L.ux(i, j), ih};
                e[1] = {L.ux(i, j - 1), -ih};
                e[2] = {L.uy(i, j), ih};
                e[3] = {L.uy(i - 1, j), -ih};
                term(w, e, 4);
            }
        }
    }

    // Wall nodes: only the wall-tangential velocity has a nonzero normal derivative.
    for (int i = 1; i < nx; ++i) {
        const double wb = 0.25 * (nu(i - 1, 0) + nu(i, 0));
        e[0] = {L.ux(i, 0), 2.0 * ih};
        term(wb, e, 1);
        const double wt = 0.25 * (nu(i - 1, ny - 1) + nu(i, ny - 1));
        e[0] = {L.ux(i, ny - 1), -2.0 * ih};
        term(wt, e, 1);
    }
    for (int j = 1; j < ny; ++j) {
        const double wl = 0.25 * (nu(0, j - 1) + nu(0, j));
        e[0] = {L.uy(0, j), 2.0 * ih};
        term(wl, e, 1);
        const double wr = 0.25 * (nu(nx - 1, j - 1) + nu(nx - 1, j));
        e[0] = {L.uy(nx - 1, j), -2.0 * ih};
        term(wr, e, 1);
    }
}

/// Face-averaged drag coefficient on interior faces, in unknown order.
inline Eigen::VectorXd face_drag(const ScalarField& eta) {
    const Grid2D& g = eta.grid();
    return MacLayout(g).pack(face_average(eta));
}

inline Eigen::SparseMatrix<double> assemble_velocity_block(const ScalarField& nu, const ScalarField& eta,
                                                           ViscousForm form) {
    const Grid2D& g = nu.grid();
    const MacLayout L(g);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(L.size()) * 12);
    for_each_viscous_term(g, nu, form, [&](double w, const EnergyEntry* e, int n) {
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) trip.emplace_back(e[a].dof, e[b].dof, w * e[a].coef * e[b].coef);
        }
    });
    const Eigen::VectorXd drag = face_drag(eta);
    for (int k = 0; k < L.size(); ++k) trip.emplace_back(k, k, drag[k]);
    Eigen::SparseMatrix<double> A(L.size(), L.size());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

/// h^2 * sum of weight * (linear form)^2, i.e. the discrete int nu |grad u|^2.
inline double viscous_energy(const StaggeredVectorField& u, const ScalarField& nu, ViscousForm form) {
    const Grid2D& g = u.grid();
    const Eigen::VectorXd v = MacLayout(g).pack(u);
    double s = 0.0;
    for_each_viscous_term(g, nu, form, [&](double w, const EnergyEntry* e, int n) {
        double l = 0.0;
        for (int a = 0; a < n; ++a) l += e[a].coef * v[e[a].dof];
        s += w * l * l;
    });
    return g.h() * g.h() * s;
}

/// Discrete ||grad u||^2 (the V_div norm squared).
inline double velocity_gradient_sq(const StaggeredVectorField& u) {
    return viscous_energy(u, ScalarField(u.grid(), 1.0), ViscousForm::DivGrad);
}

// ---------------------------------------------------------------------------

namespace detail {

// div u from packed interior unknowns (wall faces are zero).
inline void apply_div(const Grid2D& g, const MacLayout& L, const Eigen::VectorXd& u, Eigen::VectorXd& out) {
    const int nx = g.nx(), ny = g.ny();
    const double ih = 1.0 / g.h();
    out.resize(static_cast<Eigen::Index>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double s = 0.0;
            if (i + 1 <= nx - 1) s += u[L.ux(i + 1, j)];
            if (i >= 1) s -= u[L.ux(i, j)];
            if (j + 1 <= ny - 1) s += u[L.uy(i, j + 1)];
            if (j >= 1) s -= u[L.uy(i, j)];
            out[j * nx + i] = s * ih;
        }
    }
}

// D^T p = -grad p on interior faces.
inline void apply_div_transpose(const Grid2D& g, const MacLayout& L, const Eigen::VectorXd& p, Eigen::VectorXd& out) {
    const int nx = g.nx(), ny = g.ny();
    const double ih = 1.0 / g.h();
    out.setZero(L.size());
    for (int j = 0; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) out[L.ux(i, j)] = -(p[j * nx + i] - p[j * nx + i - 1]) * ih;
    }
    for (int j = 1; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) out[L.uy(i, j)] = -(p[j * nx + i] - p[(j - 1) * nx + i]) * ih;
    }
}

inline void remove_mean(Eigen::VectorXd& p) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) s += p[k];
    const double m = s / static_cast<double>(p.size());
    for (Eigen::Index k = 0; k < p.size(); ++k) p[k] -= m;
}

inline double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << v;
    return os.str();
}

inline double max_abs(const Eigen::VectorXd& a) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k]));
    return m;
}

} // namespace detail

/// Reusable solver: the velocity factorisation is kept while nu, eta and the
/// viscous form are unchanged.
class BrinkmanSolver {
public:
    FlowSolution solve(const BrinkmanProblem& prob, const BrinkmanOptions& opts = {},
                       const ScalarField* pi_guess = nullptr) {
        const Grid2D& g = prob.nu.grid();
        require_same_grid(g, prob.eta.grid(), "BrinkmanSolver::solve");
        require_same_grid(g, prob.force.grid(), "BrinkmanSolver::solve");
        double nu_min = std::numeric_limits<double>::infinity(), nu_sum = 0.0;
        for (double v : prob.nu.values()) {
            nu_min = std::min(nu_min, v);
            nu_sum += v;
        }
        if (!(nu_min > 0.0)) throw ConfigError("viscosity must be positive");
        for (double v : prob.eta.values()) {
            if (!(v >= 0.0)) throw ConfigError("permeability drag eta must be non-negative");
        }
        prepare(prob, opts.form);
        const MacLayout L(g);
        const double rho = opts.rho > 0.0 ? opts.rho : nu_sum / static_cast<double>(prob.nu.size());

        const Eigen::VectorXd f = L.pack(prob.force);
        Eigen::VectorXd pi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.cells()));
        if (pi_guess) {
            require_same_grid(g, pi_guess->grid(), "BrinkmanSolver::solve");
            for (std::size_t k = 0; k < g.cells(); ++k) pi[static_cast<Eigen::Index>(k)] = (*pi_guess)[k];
            detail::remove_mean(pi);
        }

        Eigen::VectorXd dtp, u, divu, w, sp;
        detail::apply_div_transpose(g, L, pi, dtp);
        u = factor_->solve(f + dtp);
        detail::apply_div(g, L, u, divu);

        Eigen::VectorXd r = -divu;
        Eigen::VectorXd z = rho * r;
        detail::remove_mean(z);
        Eigen::VectorXd p = z;
        double rz = detail::dot(r, z);
        std::vector<double> trace;
        int it = 0;
        double div_max = detail::max_abs(divu);
        trace.push_back(div_max);
        while (div_max > opts.tol) {
            if (it >= opts.max_iter) {
                std::ostringstream msg;
                msg << "Brinkman Uzawa iteration did not converge in " << opts.max_iter << " iterations; div_max trace:";
                for (std::size_t k = 0; k < trace.size(); k += std::max<std::size_t>(1, trace.size() / 10)) {
                    msg << ' ' << trace[k];
                }
                msg << " ... " << trace.back();
                throw SolverError(msg.str());
            }
            ++it;
            detail::apply_div_transpose(g, L, p, dtp);
            w = factor_->solve(dtp);
            detail::apply_div(g, L, w, sp);
            const double pap = detail::dot(p, sp);
            if (!(pap > 0.0)) break; // exhausted the Krylov space at roundoff level
            const double alpha = rz / pap;
            pi += alpha * p;
            u += alpha * w;
            r -= alpha * sp;
            detail::apply_div(g, L, u, divu);
            div_max = detail::max_abs(divu);
            trace.push_back(div_max);
            z = rho * r;
            detail::remove_mean(z);
            const double rz_new = detail::dot(r, z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
        }
        detail::remove_mean(pi);

        // The CG updates accumulate rounding in u; rebuild it from the final
        // pressure and apply one refinement sweep so the momentum residual sits
        // at the level of a single solve.
        detail::apply_div_transpose(g, L, pi, dtp);
        const Eigen::VectorXd rhs = f + dtp;
        u = factor_->solve(rhs);
        u += factor_->solve(rhs - A_ * u);
        detail::apply_div(g, L, u, divu);
        div_max = detail::max_abs(divu);

        FlowSolution sol;
        sol.u = L.unpack(u);
        sol.pi = ScalarField(g);
        for (std::size_t k = 0; k < g.cells(); ++k) sol.pi[k] = pi[static_cast<Eigen::Index>(k)];
        const Eigen::VectorXd mom = A_ * u - rhs; // A u + grad pi - f
        sol.residual = detail::max_abs(mom);
        sol.div_max = div_max;
        sol.iterations = it;
        if (std::max(sol.residual, sol.div_max) > opts.tol) {
            throw SolverError("Brinkman solve stalled: momentum residual " + detail::sci(sol.residual) +
                              ", div_max " + detail::sci(sol.div_max));
        }
        return sol;
    }

    [[nodiscard]] int factorizations() const noexcept { return factorizations_; }

private:
    void prepare(const BrinkmanProblem& prob, ViscousForm form) {
        const auto nu = prob.nu.values();
        const auto eta = prob.eta.values();
        const bool same = factor_ && form == form_ && prob.nu.grid() == grid_ &&
                          std::equal(nu.begin(), nu.end(), nu_.begin(), nu_.end()) &&
                          std::equal(eta.begin(), eta.end(), eta_.begin(), eta_.end());
        if (same) return;
        const bool same_pattern = factor_ && form == form_ && prob.nu.grid() == grid_;
        A_ = assemble_velocity_block(prob.nu, prob.eta, form);
        if (!same_pattern) {
            factor_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
            factor_->analyzePattern(A_);
        }
        factor_->factorize(A_);
        if (factor_->info() != Eigen::Success) throw SolverError("velocity block factorisation failed");
        ++factorizations_;
        grid_ = prob.nu.grid();
        form_ = form;
        nu_.assign(nu.begin(), nu.end());
        eta_.assign(eta.begin(), eta.end());
    }

    Grid2D grid_;
    ViscousForm form_ = ViscousForm::DivGrad;
    std::vector<double> nu_;
    std::vector<double> eta_;
    Eigen::SparseMatrix<double> A_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> factor_;
    int factorizations_ = 0;
};

inline FlowSolution solve(const BrinkmanProblem& prob, double tol, ViscousForm form = ViscousForm::DivGrad) {
    BrinkmanSolver s;
    BrinkmanOptions opts;
    opts.tol = tol;
    opts.form = form;
    return s.solve(prob, opts);
}

struct EnergyBalance {
    double lhs = 0.0; // nu0 ||grad u||^2 + (eta u, u)
    double rhs = 0.0; // (force, u)
};

inline EnergyBalance energy_check(const BrinkmanProblem& prob, const FlowSolution& sol) {
    const Grid2D& g = prob.nu.grid();
    double nu0 = std::numeric_limits<double>::infinity();
    for (double v : prob.nu.values()) nu0 = std::min(nu0, v);
    const MacLayout L(g);
    const Eigen::VectorXd u = L.pack(sol.u);
    const Eigen::VectorXd drag = face_drag(prob.eta);
    double eu = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) eu += drag[k] * u[k] * u[k];
    EnergyBalance e;
    e.lhs = nu0 * velocity_gradient_sq(sol.u) + g.h() * g.h() * eu;
    e.rhs = inner(prob.force, sol.u);
    return e;
}

} // namespace chb
