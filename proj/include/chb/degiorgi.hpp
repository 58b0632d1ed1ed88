#pragma once

// Level-set analysis of a stored trajectory: nested time levels t_n and
// thresholds k_n, the space-time measures y_n of {s >= k_n} over [t_{n-1}, T],
// the superlinear recursion lemma, the two admissibility conditions on delta,
// and the resulting separation certificate.

#include <chb/diagnostics.hpp>
#include <chb/errors.hpp>
#include <chb/grid.hpp>
#include <chb/kernel.hpp>
#include <chb/material.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace chb {

struct DeGiorgiParams {
    double T = 10.0;
    double tau_tilde = 1.0;
    double delta = 0.05;
    int n_max = 6;
};

inline void validate_params(const DeGiorgiParams& p) {
    if (!(p.tau_tilde > 0.0)) throw ConfigError("tau_tilde must be positive");
    if (!(p.T > 3.0 * p.tau_tilde)) throw ConfigError("need T > 3 tau_tilde");
    if (!(p.delta > 0.0 && p.delta < 0.25)) throw ConfigError("delta must lie in (0, 1/4)");
    if (p.n_max < 3) throw ConfigError("n_max must be >= 3");
}

/// t_{-1}, t_0, ..., t_{n_max}; entry k holds t_{k-1}.
inline std::vector<double> time_levels(double T, double tau_tilde, int n_max) {
    if (!(tau_tilde > 0.0) || !(T >= 3.0 * tau_tilde)) throw ConfigError("time_levels needs T >= 3 tau_tilde > 0");
    if (n_max < 0) throw ConfigError("time_levels needs n_max >= 0");
    const double limit = T - tau_tilde;
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(n_max) + 2);
    t.push_back(T - 3.0 * tau_tilde);
    for (int n = 0; n <= n_max; ++n) t.push_back(limit - std::ldexp(tau_tilde, -n));
    return t;
}

/// k_0, ..., k_{n_max} with k_n = 1 - delta - delta / 2^n.
inline std::vector<double> thresholds(double delta, int n_max) {
    if (!(delta > 0.0 && delta < 0.25)) throw ConfigError("thresholds needs delta in (0, 1/4)");
    if (n_max < 0) throw ConfigError("thresholds needs n_max >= 0");
    std::vector<double> k;
    k.reserve(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) k.push_back((1.0 - delta) - std::ldexp(delta, -n));
    return k;
}

inline ScalarField truncate(const ScalarField& phi, double k) {
    return map(phi, [k](double v) { return std::max(v - k, 0.0); });
}

struct LevelSetSeries {
    std::vector<double> y;
    std::vector<double> t_levels; // t_{-1..n_max}
    std::vector<double> k_levels; // k_{0..n_max}
};

/// Snapshots of the symmetric coordinate, each with its values sorted, so the
/// measure of any super-level set costs one binary search.
class SortedSnapshots {
public:
    SortedSnapshots(const Trajectory& traj, const MaterialModel& model) {
        for (const auto& [t, phi] : traj.snapshots()) {
            if (!grid_) grid_ = phi.grid();
            const ScalarField s = symmetric_coordinate(model, phi);
            std::vector<double> v(s.values().begin(), s.values().end());
            std::sort(v.begin(), v.end());
            times_.push_back(t);
            sorted_.push_back(std::move(v));
        }
    }

    /// Symmetric-coordinate snapshots, used directly.
    explicit SortedSnapshots(const Trajectory& traj) {
        for (const auto& [t, s] : traj.snapshots()) {
            if (!grid_) grid_ = s.grid();
            std::vector<double> v(s.values().begin(), s.values().end());
            std::sort(v.begin(), v.end());
            times_.push_back(t);
            sorted_.push_back(std::move(v));
        }
    }

    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }
    [[nodiscard]] double cell_area() const { return grid_->h() * grid_->h(); }
    [[nodiscard]] double omega_area() const { return grid_->area(); }

    /// |{sign * s >= k}| for snapshot i.
    [[nodiscard]] double measure(std::size_t i, double k, double sign) const {
        const auto& v = sorted_[i];
        std::size_t n;
        if (sign > 0) {
            n = static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), k));
        } else {
            // -s >= k  <=>  s <= -k
            n = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), -k) - v.begin());
        }
        return cell_area() * static_cast<double>(n);
    }

    /// min over snapshots in [a, b] of 1 - max|s|.
    [[nodiscard]] double min_gap(double a, double b) const {
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < size(); ++i) {
            if (times_[i] >= a - 1e-9 && times_[i] <= b + 1e-9) {
                gap = std::min(gap, 1.0 - std::max(std::abs(sorted_[i].front()), std::abs(sorted_[i].back())));
            }
        }
        return gap;
    }

private:
    std::optional<Grid2D> grid_;
    std::vector<double> times_;
    std::vector<std::vector<double>> sorted_;
};

inline void check_coverage(const SortedSnapshots& snaps, const DeGiorgiParams& p) {
    const auto& t = snaps.times();
    const double a = p.T - 3.0 * p.tau_tilde;
    const double slack = 1e-9 * std::max(1.0, std::abs(p.T));
    if (t.empty() || t.front() > a + slack || t.back() < p.T - slack) {
        throw CoverageError("snapshots do not cover [T - 3 tau_tilde, T]");
    }
    const double cadence = std::ldexp(p.tau_tilde, -(p.n_max + 1));
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (t[i + 1] < a || t[i] > p.T) continue;
        if (t[i + 1] - t[i] > cadence * (1.0 + 1e-9)) {
            throw CoverageError("snapshot spacing " + std::to_string(t[i + 1] - t[i]) + " at t = " +
                                std::to_string(t[i]) + " exceeds tau_tilde / 2^(n_max+1) = " +
                                std::to_string(cadence));
        }
    }
}

/// y_n for the side `sign` (+1 upper, -1 lower).
inline LevelSetSeries y_sequence(const SortedSnapshots& snaps, const DeGiorgiParams& p, double sign = 1.0) {
    validate_params(p);
    check_coverage(snaps, p);
    LevelSetSeries out;
    out.t_levels = time_levels(p.T, p.tau_tilde, p.n_max);
    out.k_levels = thresholds(p.delta, p.n_max);
    const auto& t = snaps.times();
    for (int n = 0; n <= p.n_max; ++n) {
        const double k = out.k_levels[static_cast<std::size_t>(n)];
        std::vector<double> m(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) m[i] = snaps.measure(i, k, sign);
        out.y.push_back(detail::integrate_series(t, m, out.t_levels[static_cast<std::size_t>(n)], p.T));
    }
    return out;
}

inline LevelSetSeries y_sequence(const Trajectory& traj, const DeGiorgiParams& p, const MaterialModel& model,
                                 double sign = 1.0) {
    return y_sequence(SortedSnapshots(traj, model), p, sign);
}

// ---------------------------------------------------------------------------
// Recursion lemma: y_{n+1} <= C b^n y_n^{1+eps} and y_0 <= C^{-1/eps} b^{-1/eps^2}
// imply y_n <= y_0 b^{-n/eps}.

inline constexpr double kLemmaSlack = 1e-6;

inline double lemma32_threshold(double C, double b, double eps) {
    if (!(C > 0.0 && b > 1.0 && eps > 0.0)) throw DomainError("lemma threshold needs C > 0, b > 1, eps > 0");
    return std::exp(-std::log(C) / eps - std::log(b) / (eps * eps));
}

inline bool lemma32_verify(const std::vector<double>& y, double C, double b, double eps) {
    if (y.empty()) return false;
    const double y0 = y.front();
    if (!(y0 <= lemma32_threshold(C, b, eps))) return false;
    for (std::size_t n = 0; n < y.size(); ++n) {
        const double bound = y0 * std::pow(b, -static_cast<double>(n) / eps);
        if (y[n] > bound * (1.0 + kLemmaSlack)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Admissibility of delta.

struct DeGiorgiConstants {
    double K = 0.0;             // bound of |M|, |M'|, |M''|, |M'''| on the symmetric interval [0, 1/2]
    double lam_ma_sup = 0.0;    // sup |lambda + m a|
    double m_sup = 0.0;         // sup m
    double grad_a_sup = 0.0;    // sup |grad a|
    double grad_J_l1 = 0.0;     // sup_x int |grad J(x - y)| dy
    double tau_tilde = 1.0;
    double omega_area = 1.0;
    double C_tilde = 0.0;       // measured sup of ||F'(phi)||_{L1}
    double C_generic = 0.0;     // 2 (1 + K) / tau_tilde
};

namespace detail {

/// Native coordinate of the symmetric value s.
inline double native_point(const MaterialModel& model, double s) {
    const auto& p = model.potential;
    return p.mid() + 0.5 * s * (p.hi() - p.lo());
}

} // namespace detail

inline DeGiorgiConstants measure_constants(const MaterialModel& model, const Kernel& kernel, double tau_tilde,
                                           double C_tilde, int n_scan = 20001) {
    DeGiorgiConstants c;
    for (int i = 0; i < n_scan; ++i) {
        const double s = 0.5 * static_cast<double>(i) / (n_scan - 1);
        const double r = detail::native_point(model, s);
        c.K = std::max({c.K, std::abs(entropy_m(model, r)), std::abs(entropy_m_prime(model, r)),
                        std::abs(entropy_m_dprime(model, r)), std::abs(entropy_m_tprime(model, r))});
    }
    double a_max = 0.0;
    for (double v : kernel.a_field().values()) a_max = std::max(a_max, v);
    for (int i = 1; i < n_scan - 1; ++i) {
        const double s = -1.0 + 2.0 * static_cast<double>(i) / (n_scan - 1);
        const double r = detail::native_point(model, s);
        const double m = mobility(model, r);
        c.m_sup = std::max(c.m_sup, m);
        c.lam_ma_sup = std::max({c.lam_ma_sup, std::abs(lambda(model, r)), std::abs(lambda(model, r) + m * a_max)});
    }
    c.grad_a_sup = kernel.grad_a_sup();
    c.grad_J_l1 = kernel.grad_l1_norm();
    c.tau_tilde = tau_tilde;
    c.omega_area = kernel.grid().area();
    c.C_tilde = C_tilde;
    c.C_generic = 2.0 * (1.0 + c.K) / tau_tilde;
    return c;
}

/// 1/F1''(1 - 2 delta) in the symmetric coordinate. For the Flory form the analysis
/// uses 2 F(r(s)), which is the logarithmic potential up to a constant, so both
/// variants share 2 theta / (1 - s^2) here and in abs_f1p_at.
inline double inverse_f1pp_at(const MaterialModel& model, double delta) {
    const double s = 1.0 - 2.0 * delta;
    return (1.0 - s) * (1.0 + s) / (2.0 * model.potential.theta);
}

/// |F1'(1 - 2 delta)| in the symmetric coordinate.
inline double abs_f1p_at(const MaterialModel& model, double delta) {
    const double s = 1.0 - 2.0 * delta;
    return std::abs(model.potential.theta * (std::log1p(s) - std::log1p(-s)));
}

struct Cond308Terms {
    double lhs = 0.0;
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;
    [[nodiscard]] double rhs() const { return std::max({t1, t2, t3}); }
    [[nodiscard]] bool holds() const { return lhs <= rhs(); }
};

inline Cond308Terms cond_308_terms(double delta, const MaterialModel& model, const DeGiorgiConstants& c) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : inf; };
    Cond308Terms r;
    r.lhs = inverse_f1pp_at(model, delta);
    r.t1 = ratio(1.0, 8.0 * c.lam_ma_sup * c.K);
    r.t2 = ratio(c.tau_tilde, 4.0 * c.omega_area);
    r.t3 = ratio(2.0, (2.0 + c.K * c.K) * c.tau_tilde * c.m_sup * c.m_sup *
                          (c.grad_a_sup * c.grad_a_sup + c.grad_J_l1 * c.grad_J_l1));
    return r;
}

inline bool cond_308(double delta, const MaterialModel& model, const DeGiorgiConstants& c) {
    return cond_308_terms(delta, model, c).holds();
}

/// Right-hand side |Omega| / (2^19 * 3 * C^2 * C_tilde * tau^2); +inf when C or C_tilde vanish.
inline double d4_bound(double C, double C_tilde, double tau_tilde, double omega_area) {
    const double den = std::ldexp(3.0, 19) * C * C * C_tilde * tau_tilde * tau_tilde;
    return den > 0.0 ? omega_area / den : std::numeric_limits<double>::infinity();
}

inline bool cond_d4(double delta, const MaterialModel& model, double B) {
    if (std::isinf(B)) return true;
    const double lhs = 1.0 / (abs_f1p_at(model, delta) * std::pow(delta, 4));
    return lhs <= B;
}

inline bool cond_d4(double delta, const MaterialModel& model, double C_rec, double C_tilde, double tau_tilde,
                    double omega_area) {
    return cond_d4(delta, model, d4_bound(C_rec, C_tilde, tau_tilde, omega_area));
}

// ---------------------------------------------------------------------------

inline constexpr int kCertificateSchema = 1;
inline const double kLemmaB = std::pow(2.0, 4.5);
inline constexpr double kLemmaEps = 0.75;

struct SeparationCertificate {
    double delta = 0.0;
    double C_fit = 0.0;     // smallest C with y_{n+1} <= C b^n y_n^{1+eps} on the measured series
    double C_formula = 0.0; // 2^{33/4} C_gen^{3/2} / delta^3 (tau/|Omega|)^{3/4}
    double b = kLemmaB;
    double eps = kLemmaEps;
    double y0 = 0.0; // max over both sides
    double y0_threshold = 0.0;
    bool cond_308 = false;
    bool cond_d4 = false;
    bool decay_verified = false;
    double delta_obs_min = 0.0;
    std::string mode; // "lemma", "empirical" or "fail"
    bool pass = false;
    LevelSetSeries upper;
    LevelSetSeries lower;
    DeGiorgiConstants constants;
};

inline double recursion_constant(double delta, const DeGiorgiConstants& c) {
    return std::pow(2.0, 33.0 / 4.0) * std::pow(c.C_generic, 1.5) / (delta * delta * delta) *
           std::pow(c.tau_tilde / c.omega_area, 0.75);
}

inline double fit_recursion_constant(const std::vector<double>& y, double b, double eps) {
    double C = 0.0;
    for (std::size_t n = 0; n + 1 < y.size(); ++n) {
        if (y[n] > 0.0) C = std::max(C, y[n + 1] / (std::pow(b, static_cast<double>(n)) * std::pow(y[n], 1.0 + eps)));
    }
    return C;
}

inline bool is_nonincreasing(const std::vector<double>& y) {
    for (std::size_t n = 0; n + 1 < y.size(); ++n) {
        if (y[n + 1] > y[n]) return false;
    }
    return true;
}

inline SeparationCertificate certify(const SortedSnapshots& snaps, const DeGiorgiParams& p, const MaterialModel& model,
                                     const DeGiorgiConstants& c) {
    SeparationCertificate cert;
    cert.delta = p.delta;
    cert.constants = c;
    cert.upper = y_sequence(snaps, p, 1.0);
    cert.lower = y_sequence(snaps, p, -1.0);
    cert.y0 = std::max(cert.upper.y.front(), cert.lower.y.front());
    cert.C_formula = recursion_constant(p.delta, c);
    cert.C_fit = std::max(fit_recursion_constant(cert.upper.y, cert.b, cert.eps),
                          fit_recursion_constant(cert.lower.y, cert.b, cert.eps));
    cert.y0_threshold = lemma32_threshold(cert.C_formula, cert.b, cert.eps);
    cert.cond_308 = cond_308(p.delta, model, c);
    cert.cond_d4 = cond_d4(p.delta, model, c.C_generic, c.C_tilde, c.tau_tilde, c.omega_area);
    cert.delta_obs_min = snaps.min_gap(p.T - p.tau_tilde, p.T);

    auto lemma_side = [&](const LevelSetSeries& s) {
        return s.y.front() == 0.0 || lemma32_verify(s.y, cert.C_formula, cert.b, cert.eps);
    };
    cert.decay_verified = cert.y0 > 0.0 && lemma_side(cert.upper) && lemma_side(cert.lower);
    const bool empirical =
        cert.upper.y.back() == 0.0 && cert.lower.y.back() == 0.0 && cert.delta_obs_min >= p.delta;
    if (cert.decay_verified) {
        cert.mode = "lemma";
        cert.pass = true;
    } else if (empirical) {
        cert.mode = "empirical";
        cert.pass = true;
    } else {
        cert.mode = "fail";
        cert.pass = false;
    }
    return cert;
}

inline SeparationCertificate certify(const Trajectory& traj, const DeGiorgiParams& p, const MaterialModel& model,
                                     const DeGiorgiConstants& c) {
    return certify(SortedSnapshots(traj, model), p, model, c);
}

// ---------------------------------------------------------------------------

struct DeltaScanEntry {
    double delta = 0.0;
    bool cond_308 = false;
    bool cond_d4 = false;
    bool pass = false;
    bool all_y_zero = false;
    bool monotone = false;
    std::string mode;
};

struct DeltaScan {
    std::vector<DeltaScanEntry> entries;
    double best_delta = 0.0;     // largest delta passing conditions and certificate, else largest empirical
    bool conditions_met = false; // false flags an empirical-only answer
    double empirical_delta = 0.0;
    bool window_found = false;   // delta values satisfying both paper conditions
    double window_lo = 0.0;
    double window_hi = 0.0;
};

inline DeltaScan scan_delta(const SortedSnapshots& snaps, DeGiorgiParams p, const MaterialModel& model,
                            const DeGiorgiConstants& c, int n_delta = 400) {
    DeltaScan out;
    const double lo = std::log(1e-4), hi = std::log(0.25);
    for (int i = 1; i <= n_delta; ++i) {
        // open interval: exclude both end points
        p.delta = std::exp(lo + (hi - lo) * static_cast<double>(i) / (n_delta + 1));
        const SeparationCertificate cert = certify(snaps, p, model, c);
        DeltaScanEntry e;
        e.delta = p.delta;
        e.cond_308 = cert.cond_308;
        e.cond_d4 = cert.cond_d4;
        e.pass = cert.pass;
        e.mode = cert.mode;
        e.all_y_zero = std::all_of(cert.upper.y.begin(), cert.upper.y.end(), [](double v) { return v == 0.0; }) &&
                       std::all_of(cert.lower.y.begin(), cert.lower.y.end(), [](double v) { return v == 0.0; });
        e.monotone = is_nonincreasing(cert.upper.y) && is_nonincreasing(cert.lower.y);
        if (e.pass) out.empirical_delta = std::max(out.empirical_delta, e.delta);
        if (e.cond_308 && e.cond_d4) {
            if (!out.window_found) out.window_lo = e.delta;
            out.window_found = true;
            out.window_hi = e.delta;
            if (e.pass) {
                out.conditions_met = true;
                out.best_delta = e.delta;
            }
        }
        out.entries.push_back(e);
    }
    if (!out.conditions_met) out.best_delta = out.empirical_delta;
    return out;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LevelSetSeries& s) {
    return {{"y", s.y}, {"t_levels", s.t_levels}, {"k_levels", s.k_levels}};
}

inline nlohmann::json to_json(const DeGiorgiConstants& c) {
    return {{"K", c.K},
            {"lam_ma_sup", c.lam_ma_sup},
            {"m_sup", c.m_sup},
            {"grad_a_sup", c.grad_a_sup},
            {"grad_J_l1", c.grad_J_l1},
            {"tau_tilde", c.tau_tilde},
            {"omega_area", c.omega_area},
            {"C_tilde", c.C_tilde},
            {"C_generic", c.C_generic}};
}

inline nlohmann::json to_json(const SeparationCertificate& c) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    };
    return {{"schema", kCertificateSchema},
            {"delta", c.delta},
            {"C_fit", num(c.C_fit)},
            {"C_formula", num(c.C_formula)},
            {"b", c.b},
            {"eps", c.eps},
            {"y0", c.y0},
            {"y0_threshold", num(c.y0_threshold)},
            {"cond_308", c.cond_308},
            {"cond_d4", c.cond_d4},
            {"decay_verified", c.decay_verified},
            {"delta_obs_min", num(c.delta_obs_min)},
            {"mode", c.mode},
            {"pass", c.pass},
            {"upper", to_json(c.upper)},
            {"lower", to_json(c.lower)},
            {"constants", to_json(c.constants)}};
}

inline nlohmann::json to_json(const DeltaScan& s) {
    nlohmann::json window = nullptr;
    if (s.window_found) window = {s.window_lo, s.window_hi};
    return {{"best_delta", s.best_delta},
            {"conditions_met", s.conditions_met},
            {"flag", s.conditions_met ? "ok" : "conditions-not-met"},
            {"empirical_delta", s.empirical_delta},
            {"condition_window", window},
            {"n_tested", s.entries.size()}};
}

} // namespace chb
