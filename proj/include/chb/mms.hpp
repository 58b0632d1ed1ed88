#pragma once

// Manufactured-solution convergence studies for the flow and phase solvers.

#include <chb/brinkman.hpp>
#include <chb/chsolver.hpp>
#include <chb/errors.hpp>
#include <chb/grid.hpp>
#include <chb/kernel.hpp>
#include <chb/material.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace chb {

struct MmsStudy {
    std::string name;
    std::vector<int> sizes;
    std::vector<double> errors;
    std::vector<double> ratios; // errors[k] / errors[k+1]
    double ratio_lo = 3.2;
    double ratio_hi = 4.8;
    [[nodiscard]] bool pass() const {
        if (ratios.empty()) return false;
        for (double r : ratios) {
            if (!(r >= ratio_lo && r <= ratio_hi)) return false;
        }
        return true;
    }
};

namespace detail {

inline void fill_ratios(MmsStudy& s) {
    s.ratios.clear();
    for (std::size_t k = 0; k + 1 < s.errors.size(); ++k) s.ratios.push_back(s.errors[k] / s.errors[k + 1]);
}

} // namespace detail

/// Brinkman with nu = eta = 1 on the unit square, exact velocity from the
/// stream function sin^2(pi x) sin^2(pi y) and pressure cos(pi x) cos(pi y).
/// Returns the L2 velocity error.
inline double brinkman_mms_error(int n, ViscousForm form = ViscousForm::DivGrad, double tol = 1e-10) {
    using std::numbers::pi;
    const Grid2D g(n, n, 1.0, 1.0);
    auto ux = [](double x, double y) { return pi * std::pow(std::sin(pi * x), 2) * std::sin(2 * pi * y); };
    auto uy = [](double x, double y) { return -pi * std::sin(2 * pi * x) * std::pow(std::sin(pi * y), 2); };
    const double p3 = pi * pi * pi;
    // For a divergence-free field both viscous forms reduce to -lap u.
    auto fx = [&](double x, double y) {
        const double lap = 2 * p3 * std::cos(2 * pi * x) * std::sin(2 * pi * y) -
                           4 * p3 * std::pow(std::sin(pi * x), 2) * std::sin(2 * pi * y);
        return -lap + ux(x, y) - pi * std::sin(pi * x) * std::cos(pi * y);
    };
    auto fy = [&](double x, double y) {
        const double lap = 4 * p3 * std::sin(2 * pi * x) * std::pow(std::sin(pi * y), 2) -
                           2 * p3 * std::sin(2 * pi * x) * std::cos(2 * pi * y);
        return -lap + uy(x, y) - pi * std::cos(pi * x) * std::sin(pi * y);
    };
    BrinkmanProblem prob{ScalarField(g, 1.0), ScalarField(g, 1.0), sample_faces(g, fx, fy)};
    prob.force.zero_boundary();
    BrinkmanSolver solver;
    BrinkmanOptions opts;
    opts.tol = tol;
    opts.form = form;
    opts.max_iter = 2000;
    const FlowSolution sol = solver.solve(prob, opts);
    StaggeredVectorField err = sol.u;
    err -= sample_faces(g, ux, uy);
    err.zero_boundary();
    return l2_norm(err);
}

inline MmsStudy brinkman_mms_study(std::vector<int> sizes = {32, 64, 128}) {
    MmsStudy s;
    s.name = "mms-brinkman";
    s.sizes = sizes;
    for (int n : sizes) s.errors.push_back(brinkman_mms_error(n));
    detail::fill_ratios(s);
    return s;
}

/// Phase equation with the log potential, degenerate mobility and no kernel, so the
/// diffusion coefficient is the constant 2 theta. Exact solution
/// 0.3 cos(pi x) cos(pi y) e^{-t} driven by the matching source. Returns the L2
/// error at time t_end after fixed steps of size dt.
inline double ch_mms_error(int n, double dt, double t_end) {
    using std::numbers::pi;
    const Grid2D g(n, n, 1.0, 1.0);
    MaterialModel model;
    model.potential.variant = Potential::Logarithmic;
    model.potential.theta = 1.0;
    model.mobility.variant = Mobility::DegenerateQuadratic;
    model = with_measured_constants(model, validate_assumptions(model, 0.0, 0.0, 2000));
    const Kernel kernel = build_gaussian(g, 0.0, 0.1);

    const ScalarField profile = ScalarField::from_function(
        g, [](double x, double y) { return 0.3 * std::cos(pi * x) * std::cos(pi * y); });
    const double rate = 4.0 * pi * pi * model.potential.theta - 1.0;
    StepOptions opts;
    opts.cg_rel_tol = 1e-13;
    opts.source = [&](double t) {
        ScalarField s = profile;
        s *= rate * std::exp(-t);
        return s;
    };
    StepControl ctl;
    ctl.dt = dt;
    ctl.dt_min = dt;
    ctl.dt_max = dt;
    const StaggeredVectorField u(g);
    ChState st{profile, 0.0};
    const auto steps = static_cast<long>(std::llround(t_end / dt));
    for (long k = 0; k < steps; ++k) st = step(st, u, kernel, model, ctl, opts);
    ScalarField err = st.phi;
    ScalarField exact = profile;
    exact *= std::exp(-st.t);
    err -= exact;
    return l2_norm(err);
}

inline MmsStudy ch_mms_study(std::vector<int> sizes = {32, 64, 128}, double dt = 1e-6, double t_end = 0.01) {
    MmsStudy s;
    s.name = "mms-ch";
    s.sizes = sizes;
    for (int n : sizes) s.errors.push_back(ch_mms_error(n, dt, t_end));
    detail::fill_ratios(s);
    return s;
}

inline MmsStudy mms_study(std::string_view name) {
    if (name == "mms-brinkman" || name == "brinkman") return brinkman_mms_study();
    if (name == "mms-ch" || name == "ch") return ch_mms_study();
    throw ConfigError("unknown MMS preset '" + std::string(name) + "' (expected mms-ch|mms-brinkman)");
}

} // namespace chb
