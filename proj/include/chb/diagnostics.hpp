#pragma once

// Per-step measurements and the windowed dissipation / uniform-bound checks.
// Quantities that depend on the phase variable through logarithms are taken
// in the symmetric coordinate s in (-1, 1), which coincides with phi for the
// logarithmic potential.

#include <chb/brinkman.hpp>
#include <chb/chsolver.hpp>
#include <chb/errors.hpp>
#include <chb/grid.hpp>
#include <chb/kernel.hpp>
#include <chb/material.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace chb {

struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    double l2_phi = 0.0;
    double h1_phi = 0.0;
    double linf_phi = 0.0;
    double sep_gap = 0.0;
    double u_h1 = 0.0;
    double mmu_l2 = 0.0;
    double f1_l1 = 0.0;
    double log_plus = 0.0;
    double log_minus = 0.0;
    double omega1_frac = 0.0;
};

/// Column names in CSV order.
inline const std::vector<std::string>& diagnostics_columns() {
    static const std::vector<std::string> cols{"t",     "mass",   "l2_phi", "h1_phi",   "linf_phi",  "sep_gap",
                                               "u_h1",  "mmu_l2", "f1_l1",  "log_plus", "log_minus", "omega1_frac"};
    return cols;
}

inline std::vector<double> diagnostics_values(const DiagnosticsRecord& r) {
    return {r.t,    r.mass,   r.l2_phi, r.h1_phi,   r.linf_phi,  r.sep_gap,
            r.u_h1, r.mmu_l2, r.f1_l1,  r.log_plus, r.log_minus, r.omega1_frac};
}

struct Omega1Check {
    double frac = 0.0;
    bool pass = false;
};

/// Fraction of cells with s >= -(1 - s_bar0)/2 against the lower bound (1 + s_bar0)/4.
inline Omega1Check omega1_check(const ScalarField& s, double s_bar0) {
    const double thr = -(1.0 - s_bar0) / 2.0;
    std::size_t n = 0;
    for (double v : s.values()) n += v >= thr ? 1 : 0;
    Omega1Check c;
    c.frac = static_cast<double>(n) / static_cast<double>(s.size());
    c.pass = c.frac >= (1.0 + s_bar0) / 4.0;
    return c;
}

/// Measures one state. `u` may be the zero field.
inline DiagnosticsRecord record(const ChState& state, const StaggeredVectorField& u, const Kernel& kernel,
                                const MaterialModel& model) {
    const ScalarField& phi = state.phi;
    require_same_grid(phi.grid(), u.grid(), "record");
    require_same_grid(phi.grid(), kernel.grid(), "record");
    for (double v : phi.values()) require_interior(model, v, "diagnostics record");

    const Grid2D& g = phi.grid();
    const double h2 = g.h() * g.h();
    DiagnosticsRecord r;
    r.t = state.t;
    r.mass = integrate(phi);
    r.l2_phi = l2_norm(phi);
    r.h1_phi = l2_norm(grad_cc_to_face(phi));
    r.linf_phi = max_abs(phi);
    r.u_h1 = std::sqrt(velocity_gradient_sq(u));
    r.mmu_l2 = l2_norm(diffusive_flux(phi, kernel, model));

    const ScalarField s = symmetric_coordinate(model, phi);
    const double theta = model.potential.theta;
    double smax = 0.0, f1 = 0.0, lp = 0.0, lm = 0.0;
    for (double v : s.values()) {
        smax = std::max(smax, std::abs(v));
        const double a = std::log1p(v) - std::log(2.0);  // log((1+s)/2) <= 0
        const double b = std::log1p(-v) - std::log(2.0); // log((1-s)/2) <= 0
        f1 += std::abs(theta * (a - b));
        lp += std::abs(a);
        lm += std::abs(b);
    }
    r.sep_gap = 1.0 - smax;
    r.f1_l1 = h2 * f1;
    r.log_plus = h2 * lp;
    r.log_minus = h2 * lm;
    r.omega1_frac = omega1_check(s, mean(s)).frac;
    return r;
}

class Trajectory {
public:
    void add_record(const DiagnosticsRecord& r) {
        if (!records_.empty() && !(r.t > records_.back().t)) {
            throw WindowError("trajectory records must have strictly increasing t");
        }
        records_.push_back(r);
    }
    void add_snapshot(double t, ScalarField phi) {
        if (!snapshots_.empty() && !(t > snapshots_.back().first)) {
            throw WindowError("trajectory snapshots must have strictly increasing t");
        }
        snapshots_.emplace_back(t, std::move(phi));
    }

    [[nodiscard]] const std::vector<DiagnosticsRecord>& records() const noexcept { return records_; }
    [[nodiscard]] const std::vector<std::pair<double, ScalarField>>& snapshots() const noexcept { return snapshots_; }

private:
    std::vector<DiagnosticsRecord> records_;
    std::vector<std::pair<double, ScalarField>> snapshots_;
};

// ---------------------------------------------------------------------------
// Time integration on the stored (nonuniform) grid.

namespace detail {

inline constexpr double kCoverageSlack = 1e-9;

/// Exact integral over [a, b] of the piecewise-linear interpolant through (t_k, v_k).
inline double integrate_series(const std::vector<double>& t, const std::vector<double>& v, double a, double b) {
    if (t.empty() || a < t.front() - kCoverageSlack || b > t.back() + kCoverageSlack) {
        throw WindowError("series does not cover [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    }
    a = std::max(a, t.front());
    b = std::min(b, t.back());
    if (!(b > a)) return 0.0;
    auto value_at = [&](std::size_t k, double x) {
        const double w = (x - t[k]) / (t[k + 1] - t[k]);
        return v[k] + w * (v[k + 1] - v[k]);
    };
    std::size_t k = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), a) - t.begin());
    k = k == 0 ? 0 : k - 1;
    double s = 0.0;
    for (; k + 1 < t.size() && t[k] < b; ++k) {
        const double lo = std::max(a, t[k]);
        const double hi = std::min(b, t[k + 1]);
        if (hi > lo) s += 0.5 * (hi - lo) * (value_at(k, lo) + value_at(k, hi));
    }
    return s;
}

template <class Get>
std::vector<double> column(const std::vector<DiagnosticsRecord>& recs, Get&& get) {
    std::vector<double> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back(get(r));
    return out;
}

} // namespace detail

struct WindowReport {
    double t0 = 0.0;
    double grad_phi_sq = 0.0; // int ||grad phi||^2
    double u_sq = 0.0;        // int ||u||_{V_div}^2
    double mmu_sq = 0.0;      // int ||m grad mu||^2
    double sup_l2_sq = 0.0;   // sup ||phi||^2 on the window
    double total = 0.0;       // sum of the three integrals
    double running_max = 0.0; // max of `total` over all windows evaluated so far
};

inline WindowReport dissipativity_window(const Trajectory& traj, double t0, double length = 1.0) {
    const auto& recs = traj.records();
    const auto t = detail::column(recs, [](const DiagnosticsRecord& r) { return r.t; });
    auto sq = [&](auto get) { return detail::column(recs, [&](const DiagnosticsRecord& r) { return get(r) * get(r); }); };
    WindowReport w;
    w.t0 = t0;
    const double t1 = t0 + length;
    w.grad_phi_sq = detail::integrate_series(t, sq([](const DiagnosticsRecord& r) { return r.h1_phi; }), t0, t1);
    w.u_sq = detail::integrate_series(t, sq([](const DiagnosticsRecord& r) { return r.u_h1; }), t0, t1);
    w.mmu_sq = detail::integrate_series(t, sq([](const DiagnosticsRecord& r) { return r.mmu_l2; }), t0, t1);
    for (const auto& r : recs) {
        if (r.t >= t0 - detail::kCoverageSlack && r.t <= t1 + detail::kCoverageSlack) {
            w.sup_l2_sq = std::max(w.sup_l2_sq, r.l2_phi * r.l2_phi);
        }
    }
    w.total = w.grad_phi_sq + w.u_sq + w.mmu_sq;
    w.running_max = w.total;
    return w;
}

struct DissipativityTrend {
    std::vector<WindowReport> windows;
    double sup_l2_sq = 0.0;    // sup_t ||phi||^2 over the whole run
    double constant = 0.0;     // measured C: max window total with t0 <= t_split
    double late_max = 0.0;     // max window total with t0 > t_split
    bool pass = false;         // late_max <= slack * constant and everything finite
};

/// Slides unit windows with start spacing `stride` across the trajectory.
inline DissipativityTrend dissipativity_scan(const Trajectory& traj, double stride = 0.05, double t_split = 1.0,
                                             double slack = 1.05) {
    const auto& recs = traj.records();
    if (recs.size() < 2) throw WindowError("trajectory too short for a dissipation window");
    const double ta = recs.front().t, tb = recs.back().t;
    if (tb - ta < 1.0 - detail::kCoverageSlack) throw WindowError("trajectory shorter than one window");
    DissipativityTrend out;
    double running = 0.0;
    const int n = static_cast<int>(std::floor((tb - 1.0 - ta) / stride + 1e-9));
    for (int k = 0; k <= n; ++k) {
        WindowReport w = dissipativity_window(traj, ta + k * stride);
        running = std::max(running, w.total);
        w.running_max = running;
        if (w.t0 <= t_split + 1e-12) {
            out.constant = std::max(out.constant, w.total);
        } else {
            out.late_max = std::max(out.late_max, w.total);
        }
        out.windows.push_back(w);
    }
    bool finite = true;
    for (const auto& r : recs) {
        out.sup_l2_sq = std::max(out.sup_l2_sq, r.l2_phi * r.l2_phi);
        finite = finite && std::isfinite(r.l2_phi);
    }
    for (const auto& w : out.windows) finite = finite && std::isfinite(w.total);
    out.pass = finite && out.late_max <= slack * out.constant;
    return out;
}

// ---------------------------------------------------------------------------

/// Exact solution of g' = c^2 - beta^2 g^2 from g(0) = g0, which is the comparison
/// bound (c/beta)(e^{2 c beta t} R - 1)/(e^{2 c beta t} R + 1), R = |(c+beta g0)/(c-beta g0)|
/// for g0 < c/beta. `singular` is set when c = beta g0 (the ratio is undefined and
/// the asymptote is returned).
struct RiccatiValue {
    double value = 0.0;
    bool singular = false;
};

inline RiccatiValue riccati_eval(double c, double beta, double g0, double t) {
    if (!(c > 0.0 && beta > 0.0)) throw DomainError("riccati_bound needs c > 0 and beta > 0");
    if (!(t >= 0.0)) throw DomainError("riccati_bound needs t >= 0");
    const double cap = c / beta;
    const double den = c - beta * g0;
    if (den == 0.0) return {cap, true};
    const double R = std::abs((c + beta * g0) / den);
    const double x = c * beta * t + 0.5 * std::log(R);
    if (beta * g0 < c) return {cap * std::tanh(x), false};
    // Above the asymptote the solution decreases toward c/beta.
    return {cap / std::tanh(x), false};
}

inline double riccati_bound(double c, double beta, double g0, double t) { return riccati_eval(c, beta, g0, t).value; }

struct F1Bound {
    double sup_val = 0.0;          // max f1_l1 over t >= tau
    double first_window_max = 0.0; // max f1_l1 over [tau, tau + 1]
    double first_quarter_max = 0.0;
    double last_quarter_max = 0.0;
    double beta = 0.0;
    double c_plus = 0.0;
    double c_minus = 0.0;
    double riccati_cap = 0.0; // cap(log_plus) + cap(log_minus), which dominates f1_l1 / theta
    bool logs_finite = false;
    bool pass = false;
};

/// Uniform-in-time L1 bound for F'(phi) after time tau. The quadratic coefficient is
/// beta^2 = alpha1 |Omega| / 16; the constant c^2 is the largest measured value of
/// g' + beta^2 g^2 along the trajectory for each logarithmic integral g.
inline F1Bound f1_uniform_bound(const Trajectory& traj, double tau, double alpha1, double omega_area) {
    const auto& recs = traj.records();
    std::vector<const DiagnosticsRecord*> late;
    for (const auto& r : recs) {
        if (r.t >= tau - detail::kCoverageSlack) late.push_back(&r);
    }
    if (late.size() < 4) throw WindowError("trajectory does not extend far enough beyond tau");
    if (!(alpha1 > 0.0)) throw AssumptionError("f1_uniform_bound needs alpha1 > 0");

    F1Bound b;
    b.logs_finite = true;
    const double t_first = late.front()->t, t_last = late.back()->t;
    const double span = t_last - t_first;
    for (const auto* r : late) {
        b.sup_val = std::max(b.sup_val, r->f1_l1);
        if (r->t <= t_first + 1.0 + detail::kCoverageSlack) b.first_window_max = std::max(b.first_window_max, r->f1_l1);
        if (r->t <= t_first + 0.25 * span) b.first_quarter_max = std::max(b.first_quarter_max, r->f1_l1);
        if (r->t >= t_last - 0.25 * span) b.last_quarter_max = std::max(b.last_quarter_max, r->f1_l1);
        b.logs_finite = b.logs_finite && std::isfinite(r->log_plus) && std::isfinite(r->log_minus);
    }

    b.beta = std::sqrt(alpha1 * omega_area / 16.0);
    auto fit_c = [&](auto get) {
        double c2 = 0.0;
        for (std::size_t k = 0; k + 1 < late.size(); ++k) {
            const double dt = late[k + 1]->t - late[k]->t;
            const double g1 = get(*late[k + 1]);
            const double gp = (g1 - get(*late[k])) / dt;
            c2 = std::max(c2, gp + b.beta * b.beta * g1 * g1);
        }
        return std::sqrt(std::max(c2, std::numeric_limits<double>::min()));
    };
    auto cap = [&](double c, double g0) { return std::max(g0, c / b.beta); };
    b.c_plus = fit_c([](const DiagnosticsRecord& r) { return r.log_plus; });
    b.c_minus = fit_c([](const DiagnosticsRecord& r) { return r.log_minus; });
    b.riccati_cap = cap(b.c_plus, late.front()->log_plus) + cap(b.c_minus, late.front()->log_minus);

    b.pass = std::isfinite(b.sup_val) && b.logs_finite && b.last_quarter_max <= 1.05 * b.first_quarter_max;
    return b;
}

} // namespace chb
