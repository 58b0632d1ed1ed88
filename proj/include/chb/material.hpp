#pragma once

// Singular potentials, mobilities and the quantities derived from them:
// lambda = m F1'' (continuously extended to the closed domain), the entropy M
// with m M'' = 1, and scan-based validators for the structural assumptions
// A1-A4 on (F, m).

#include <chb/errors.hpp>
#include <chb/grid.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace chb {

enum class Potential { Logarithmic, FloryType };
enum class Mobility { DegenerateQuadratic, ReciprocalLogistic, LogisticCorrected, Constant };

struct PotentialSpec {
    Potential variant = Potential::Logarithmic;
    /// Prefactor of the convex logarithmic part F1.
    double theta = 1.0;
    /// Optional concave part F2(r) = -theta_c/2 (r - mid)^2. Zero by default.
    double theta_c = 0.0;

    [[nodiscard]] double lo() const noexcept { return variant == Potential::Logarithmic ? -1.0 : 0.0; }
    [[nodiscard]] double hi() const noexcept { return 1.0; }
    [[nodiscard]] double mid() const noexcept { return 0.5 * (lo() + hi()); }
};

struct MobilitySpec {
    Mobility variant = Mobility::DegenerateQuadratic;
    double m0 = 1.0; // only used by Constant
};

struct MaterialModel {
    PotentialSpec potential;
    MobilitySpec mobility;
    /// Measured by validate_assumptions; zero until then.
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    double eps0 = 0.0;
};

inline Potential parse_potential(std::string_view s) {
    if (s == "log") return Potential::Logarithmic;
    if (s == "flory") return Potential::FloryType;
    throw ConfigError("unknown potential '" + std::string(s) + "' (expected log|flory)");
}

inline Mobility parse_mobility(std::string_view s) {
    if (s == "degenerate") return Mobility::DegenerateQuadratic;
    if (s == "reciprocal") return Mobility::ReciprocalLogistic;
    if (s == "logistic") return Mobility::LogisticCorrected;
    if (s == "constant") return Mobility::Constant;
    throw ConfigError("unknown mobility '" + std::string(s) + "' (expected degenerate|reciprocal|logistic|constant)");
}

inline const char* to_string(Potential p) { return p == Potential::Logarithmic ? "log" : "flory"; }

inline const char* to_string(Mobility m) {
    switch (m) {
    case Mobility::DegenerateQuadratic: return "degenerate";
    case Mobility::ReciprocalLogistic: return "reciprocal";
    case Mobility::LogisticCorrected: return "logistic";
    case Mobility::Constant: return "constant";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Potential

inline bool in_open_domain(const MaterialModel& model, double r) noexcept {
    return r > model.potential.lo() && r < model.potential.hi();
}

inline void require_interior(const MaterialModel& model, double r, const char* what) {
    if (!in_open_domain(model, r)) {
        throw DomainError(std::string(what) + ": argument " + std::to_string(r) + " outside the open interval (" +
                          std::to_string(model.potential.lo()) + ", " + std::to_string(model.potential.hi()) + ")");
    }
}

/// Distance from r to the nearest pure phase.
inline double domain_gap(const MaterialModel& model, double r) noexcept {
    return std::min(r - model.potential.lo(), model.potential.hi() - r);
}

inline double f_value(const MaterialModel& model, double r) {
    require_interior(model, r, "F");
    const auto& p = model.potential;
    const double d = r - p.mid();
    const double concave = -0.5 * p.theta_c * d * d;
    if (p.variant == Potential::Logarithmic) {
        return p.theta * ((1.0 + r) * std::log1p(r) + (1.0 - r) * std::log1p(-r)) + concave;
    }
    return p.theta * (r * std::log(r) + (1.0 - r) * std::log1p(-r)) + concave;
}

inline double f_prime(const MaterialModel& model, double r) {
    require_interior(model, r, "F'");
    const auto& p = model.potential;
    const double concave = -p.theta_c * (r - p.mid());
    if (p.variant == Potential::Logarithmic) {
        return p.theta * (std::log1p(r) - std::log1p(-r)) + concave;
    }
    return p.theta * (std::log(r) - std::log1p(-r)) + concave;
}

/// Second derivative of the convex part F1 only.
inline double f1_double_prime(const MaterialModel& model, double r) {
    require_interior(model, r, "F1''");
    const auto& p = model.potential;
    if (p.variant == Potential::Logarithmic) {
        return 2.0 * p.theta / ((1.0 - r) * (1.0 + r));
    }
    return p.theta / (r * (1.0 - r));
}

inline double f2_double_prime(const MaterialModel& model) noexcept { return -model.potential.theta_c; }

inline double f_double_prime(const MaterialModel& model, double r) {
    return f1_double_prime(model, r) + f2_double_prime(model);
}

// ---------------------------------------------------------------------------
// Mobility and lambda

/// m(r) on the closed domain; unbounded variants return +inf at their poles.
inline double mobility(const MaterialModel& model, double r) noexcept {
    switch (model.mobility.variant) {
    case Mobility::DegenerateQuadratic: return (1.0 - r) * (1.0 + r);
    case Mobility::ReciprocalLogistic: return 1.0 / (r * (1.0 - r));
    case Mobility::LogisticCorrected: return r * (1.0 - r);
    case Mobility::Constant: return model.mobility.m0;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// lambda = m F1'' with the removable singularities cancelled algebraically,
/// so it is defined on the closed domain. Unbounded pairs give +-inf.
inline double lambda(const MaterialModel& model, double r) noexcept {
    const double th = model.potential.theta;
    const double m0 = model.mobility.m0;
    if (model.potential.variant == Potential::Logarithmic) {
        switch (model.mobility.variant) {
        case Mobility::DegenerateQuadratic: return 2.0 * th;
        case Mobility::LogisticCorrected: return 2.0 * th * r / (1.0 + r);
        case Mobility::ReciprocalLogistic: return 2.0 * th / (r * (1.0 - r) * (1.0 - r) * (1.0 + r));
        case Mobility::Constant: return 2.0 * th * m0 / ((1.0 - r) * (1.0 + r));
        }
    } else {
        switch (model.mobility.variant) {
        case Mobility::LogisticCorrected: return th;
        case Mobility::ReciprocalLogistic: {
            const double q = r * (1.0 - r);
            return th / (q * q);
        }
        case Mobility::DegenerateQuadratic: return th * (1.0 + r) / r;
        case Mobility::Constant: return th * m0 / (r * (1.0 - r));
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// m (F'' + a) written as lambda + m (a + F2''), finite wherever lambda is.
inline double diffusion_coefficient(const MaterialModel& model, double r, double a) noexcept {
    return lambda(model, r) + mobility(model, r) * (a + f2_double_prime(model));
}

// ---------------------------------------------------------------------------
// Entropy M with m M'' = 1, M(c) = M'(c) = 0 at the domain midpoint c.

namespace detail {

struct EntropyBase {
    double g0; // an antiderivative of g1
    double g1; // an antiderivative of 1/m
};

inline EntropyBase entropy_base(const MaterialModel& model, double r) noexcept {
    switch (model.mobility.variant) {
    case Mobility::DegenerateQuadratic: {
        const double at = std::atanh(r);
        return {r * at + 0.5 * std::log1p(-r * r), at};
    }
    case Mobility::LogisticCorrected:
        return {r * std::log(r) + (1.0 - r) * std::log1p(-r), std::log(r) - std::log1p(-r)};
    case Mobility::ReciprocalLogistic:
        return {r * r * r / 6.0 - r * r * r * r / 12.0, r * r / 2.0 - r * r * r / 3.0};
    case Mobility::Constant: {
        const double m0 = model.mobility.m0;
        return {r * r / (2.0 * m0), r / m0};
    }
    }
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
}

inline EntropyBase entropy_anchor(const MaterialModel& model) {
    const double c = model.potential.mid();
    const EntropyBase b = entropy_base(model, c);
    if (!std::isfinite(b.g0) || !std::isfinite(b.g1) || !(mobility(model, c) > 0.0)) {
        throw AssumptionError("entropy undefined: mobility vanishes or is singular at the domain midpoint");
    }
    return b;
}

} // namespace detail

inline double entropy_m(const MaterialModel& model, double r) {
    require_interior(model, r, "M");
    const double c = model.potential.mid();
    const auto a = detail::entropy_anchor(model);
    const auto b = detail::entropy_base(model, r);
    return b.g0 - a.g0 - a.g1 * (r - c);
}

inline double entropy_m_prime(const MaterialModel& model, double r) {
    require_interior(model, r, "M'");
    const auto a = detail::entropy_anchor(model);
    return detail::entropy_base(model, r).g1 - a.g1;
}

inline double entropy_m_dprime(const MaterialModel& model, double r) {
    require_interior(model, r, "M''");
    return 1.0 / mobility(model, r);
}

inline double entropy_m_tprime(const MaterialModel& model, double r) {
    require_interior(model, r, "M'''");
    switch (model.mobility.variant) {
    case Mobility::DegenerateQuadratic: {
        const double q = (1.0 - r) * (1.0 + r);
        return 2.0 * r / (q * q);
    }
    case Mobility::LogisticCorrected: {
        const double q = r * (1.0 - r);
        return (2.0 * r - 1.0) / (q * q);
    }
    case Mobility::ReciprocalLogistic: return 1.0 - 2.0 * r;
    case Mobility::Constant: return 0.0;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Assumption validation

struct AssumptionCheck {
    std::string name; // "A1".."A4"
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    double alpha0 = 0.0;    // inf lambda
    double alpha1 = 0.0;    // inf m (F'' + a)
    double eps0 = 0.0;      // endpoint monotonicity margin shared by A1 and A3
    double lambda_sup = 0.0;

    [[nodiscard]] bool ok() const noexcept {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
    }
    [[nodiscard]] const AssumptionCheck& check(std::string_view name) const {
        for (const auto& c : checks) {
            if (c.name == name) return c;
        }
        throw ConfigError("no check named " + std::string(name));
    }
    [[nodiscard]] std::string failures() const {
        std::string s;
        for (const auto& c : checks) {
            if (!c.pass) s += (s.empty() ? "" : "; ") + c.name + ": " + c.detail;
        }
        return s;
    }
};

namespace detail {

// Uniform interior points plus points geometrically clustered at both ends.
inline std::vector<double> scan_points(double lo, double hi, int n) {
    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(n) + 40);
    for (int k = 0; k < n; ++k) pts.push_back(lo + (hi - lo) * (k + 0.5) / n);
    for (int p = 3; p <= 12; ++p) {
        const double d = std::pow(10.0, -p);
        pts.push_back(lo + d);
        pts.push_back(hi - d);
    }
    std::sort(pts.begin(), pts.end());
    return pts;
}

// Largest candidate margin on which fn is monotone toward each endpoint
// (non-decreasing toward hi when `up_at_hi`, mirrored at lo). 0 if none.
template <class Fn>
double monotone_margin(double lo, double hi, bool up_at_hi, Fn&& fn) {
    constexpr double candidates[] = {0.25, 0.1, 0.05, 0.02, 0.01};
    constexpr int kSub = 2000;
    for (double eps : candidates) {
        bool ok = true;
        double prev_hi = fn(hi - eps);
        double prev_lo = fn(lo + eps);
        for (int k = 1; k <= kSub && ok; ++k) {
            const double d = eps * (1.0 - static_cast<double>(k) / (kSub + 1));
            const double vh = fn(hi - d);
            const double vl = fn(lo + d);
            const double tol_h = 1e-12 * std::max(1.0, std::abs(prev_hi));
            const double tol_l = 1e-12 * std::max(1.0, std::abs(prev_lo));
            if (up_at_hi) {
                ok = vh >= prev_hi - tol_h && vl >= prev_lo - tol_l;
            } else {
                ok = vh <= prev_hi + tol_h && vl <= prev_lo + tol_l;
            }
            prev_hi = vh;
            prev_lo = vl;
        }
        if (ok) return eps;
    }
    return 0.0;
}

} // namespace detail

/// Scan-based check of A1-A4 for `model` against kernel field bounds
/// a_min <= a(x) <= a_max. Failures are reported, never thrown.
inline ValidationReport validate_assumptions(const MaterialModel& model, double a_min, double a_max,
                                             int n_scan = 100000) {
    if (a_min > a_max) throw ConfigError("validate_assumptions: a_min > a_max");
    const double lo = model.potential.lo();
    const double hi = model.potential.hi();
    const auto pts = detail::scan_points(lo, hi, n_scan);
    ValidationReport rep;

    // A1: m continuous on the closed domain, positive inside, zero exactly at the ends,
    // monotone toward the ends.
    {
        AssumptionCheck c{"A1", true, ""};
        const double m_lo = mobility(model, lo);
        const double m_hi = mobility(model, hi);
        if (!std::isfinite(m_lo) || !std::isfinite(m_hi)) {
            c.pass = false;
            c.detail = "mobility unbounded at an endpoint";
        } else if (std::abs(m_lo) > 1e-14 || std::abs(m_hi) > 1e-14) {
            c.pass = false;
            c.detail = "mobility does not vanish at the endpoints (non-degenerate)";
        }
        if (c.pass) {
            for (double r : pts) {
                const double m = mobility(model, r);
                if (!std::isfinite(m) || !(m > 0.0)) {
                    c.pass = false;
                    c.detail = "mobility not positive and finite at r=" + std::to_string(r);
                    break;
                }
            }
        }
        const double eps_m = detail::monotone_margin(lo, hi, false, [&](double r) { return mobility(model, r); });
        if (c.pass && eps_m <= 0.0) {
            c.pass = false;
            c.detail = "mobility not monotone toward the endpoints";
        }
        rep.eps0 = eps_m;
        if (c.pass) c.detail = "eps0(m) = " + std::to_string(eps_m);
        rep.checks.push_back(c);
    }

    // A2: lambda = m F1'' continuous on the closed domain and bounded below by alpha0 > 0.
    {
        AssumptionCheck c{"A2", true, ""};
        double inf = std::numeric_limits<double>::infinity();
        double sup = -std::numeric_limits<double>::infinity();
        bool finite = true;
        auto visit = [&](double r) {
            const double l = lambda(model, r);
            if (!std::isfinite(l)) finite = false;
            inf = std::min(inf, l);
            sup = std::max(sup, l);
        };
        visit(lo);
        visit(hi);
        for (double r : pts) visit(r);
        bool continuous = finite;
        if (finite) {
            for (double end : {lo, hi}) {
                const double inside = end == lo ? lo + 1e-9 : hi - 1e-9;
                const double le = lambda(model, end);
                if (std::abs(lambda(model, inside) - le) > 1e-6 * (1.0 + std::abs(le))) continuous = false;
            }
        }
        rep.alpha0 = inf;
        rep.lambda_sup = sup;
        if (!finite) {
            c.pass = false;
            c.detail = "lambda = m F1'' is unbounded on the closed domain";
        } else if (!continuous) {
            c.pass = false;
            c.detail = "lambda has no continuous extension to the endpoints";
        } else if (!(inf > 0.0)) {
            c.pass = false;
            c.detail = "inf lambda = " + std::to_string(inf) + " is not positive";
        } else {
            c.detail = "alpha0 = " + std::to_string(inf);
        }
        rep.checks.push_back(c);
    }

    // A3: F' -> +-inf at the endpoints; F'' monotone toward the endpoints.
    {
        AssumptionCheck c{"A3", true, ""};
        // Blow-up heuristic: over decades d = 1e-2..1e-14 the increments of F'(hi - d)
        // must stay positive and must not decay (a bounded F' has vanishing increments).
        auto blows_up = [&](double sign) {
            double prev = sign > 0 ? f_prime(model, hi - 1e-2) : -f_prime(model, lo + 1e-2);
            double first_inc = 0.0;
            for (int p = 3; p <= 14; ++p) {
                const double d = std::pow(10.0, -p);
                const double v = sign > 0 ? f_prime(model, hi - d) : -f_prime(model, lo + d);
                const double inc = v - prev;
                if (p == 3) first_inc = inc;
                if (!(inc > 0.0) || inc < 0.5 * first_inc) return false;
                prev = v;
            }
            return true;
        };
        if (!blows_up(1.0) || !blows_up(-1.0)) {
            c.pass = false;
            c.detail = "F' does not blow up at both endpoints";
        }
        const double eps_f = detail::monotone_margin(lo, hi, true, [&](double r) {
            return f_double_prime(model, std::clamp(r, std::nextafter(lo, hi), std::nextafter(hi, lo)));
        });
        if (c.pass && eps_f <= 0.0) {
            c.pass = false;
            c.detail = "F'' not monotone toward the endpoints";
        }
        if (c.pass) c.detail = "eps0(F'') = " + std::to_string(eps_f);
        rep.eps0 = rep.eps0 > 0.0 ? std::min(rep.eps0, eps_f) : eps_f;
        rep.checks.push_back(c);
    }

    // A4: m (F'' + a) >= alpha1 > 0 for all interior s and all a in [a_min, a_max].
    {
        AssumptionCheck c{"A4", true, ""};
        double inf = std::numeric_limits<double>::infinity();
        bool nan = false;
        auto visit = [&](double r) {
            for (double a : {a_min, a_max}) {
                const double v = diffusion_coefficient(model, r, a);
                if (std::isnan(v)) nan = true;
                inf = std::min(inf, v);
            }
        };
        for (double r : pts) visit(r);
        rep.alpha1 = inf;
        if (nan || !(inf > 0.0)) {
            c.pass = false;
            c.detail = "inf m(F''+a) = " + std::to_string(inf) + " is not positive";
        } else {
            c.detail = "alpha1 = " + std::to_string(inf);
        }
        rep.checks.push_back(c);
    }
    return rep;
}

/// Copy of `model` carrying the measured alpha0, alpha1, eps0.
inline MaterialModel with_measured_constants(MaterialModel model, const ValidationReport& rep) {
    model.alpha0 = rep.alpha0;
    model.alpha1 = rep.alpha1;
    model.eps0 = rep.eps0;
    return model;
}

// ---------------------------------------------------------------------------
// Change of variables (0,1) -> (-1,1).

inline ScalarField transform_to_symmetric(const ScalarField& phi) {
    ScalarField psi(phi.grid());
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const double v = phi[k];
        if (!(v > 0.0 && v < 1.0)) {
            throw DomainError("transform_to_symmetric: value " + std::to_string(v) + " outside (0,1)");
        }
        psi[k] = 2.0 * v - 1.0;
    }
    return psi;
}

inline ScalarField transform_from_symmetric(const ScalarField& psi) {
    ScalarField phi(psi.grid());
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const double v = psi[k];
        if (!(v > -1.0 && v < 1.0)) {
            throw DomainError("transform_from_symmetric: value " + std::to_string(v) + " outside (-1,1)");
        }
        phi[k] = 0.5 * (v + 1.0);
    }
    return phi;
}

/// The phase variable expressed on (-1,1) regardless of the potential's native domain.
inline ScalarField symmetric_coordinate(const MaterialModel& model, const ScalarField& phi) {
    return model.potential.variant == Potential::Logarithmic ? phi : transform_to_symmetric(phi);
}

} // namespace chb
