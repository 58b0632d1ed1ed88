#pragma once

// Simulation configuration: a sectioned key = value text format.
//
//   # comment
//   [run]
//   preset = spinodal      ; optional, must come first; later keys override it
//   seed = 42
//
// Every key has a default (see config_schema()). Unknown sections or keys are
// errors, and the whole configuration is validated before anything is built.

#include <chb/errors.hpp>
#include <chb/field_io.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chb {

struct SimConfig {
    std::string preset = "custom";
    std::uint64_t seed = 42;

    int nx = 64, ny = 64;
    double lx = 1.0, ly = 1.0;

    std::string potential = "log";
    double theta = 1.0;
    double theta_c = 0.0;
    std::string mobility = "degenerate";
    double m0 = 1.0;

    std::string kernel_shape = "gaussian";
    double kernel_amplitude = 0.0;
    double kernel_eps = 0.1;

    bool flow = true;
    double nu0 = 1.0, nu1 = 1.0, eta = 1.0;
    std::string viscous_form = "divgrad";
    std::string body_force = "zero";
    double force_amp = 0.0, force_x = 0.0, force_y = 0.0;
    double flow_tol = 1e-8;
    int flow_max_iter = 500;

    double dt = 1e-3, dt_min = 1e-8, dt_max = 1e-3;
    double shrink = 0.5;
    double guard_band = 1e-9;
    double t_end = 1.0;
    int max_steps = 0; // 0 = no limit
    std::string transport = "upwind";
    double cg_tol = 1e-10;

    std::string ic = "constant";
    double ic_value = 0.2;
    double ic_mean = 0.1;
    double ic_amp = 0.05;
    double ic_width = 0.25;
    std::string ic_path;

    std::string out_dir = "out";
    int snapshot_every = 1;
    double snapshot_from = 0.0;

    bool degiorgi = false;
    double dg_T = 1.0;
    double dg_tau = 0.25;
    std::string dg_delta = "scan";
    int dg_n_max = 6;
};

// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || !std::isfinite(out)) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a finite number");
    }
    return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

} // namespace detail

struct ConfigKey {
    std::string section;
    std::string key;
    std::string doc;
    std::function<void(SimConfig&, const std::string&)> set;
    std::function<std::string(const SimConfig&)> get;
    [[nodiscard]] std::string full() const { return section + "." + key; }
};

inline const std::vector<ConfigKey>& config_schema() {
    using C = SimConfig;
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        auto num = [&k](std::string sec, std::string key, double C::*m, std::string doc) {
            const std::string full = sec + "." + key;
            k.push_back({sec, key, std::move(doc), [m, full](C& c, const std::string& v) { c.*m = detail::parse_double(full, v); },
                         [m](const C& c) { return io::fmt_double(c.*m); }});
        };
        auto integer = [&k](std::string sec, std::string key, int C::*m, std::string doc) {
            const std::string full = sec + "." + key;
            k.push_back({sec, key, std::move(doc),
                         [m, full](C& c, const std::string& v) { c.*m = detail::parse_int<int>(full, v); },
                         [m](const C& c) { return std::to_string(c.*m); }});
        };
        auto text = [&k](std::string sec, std::string key, std::string C::*m, std::string doc) {
            k.push_back({sec, key, std::move(doc), [m](C& c, const std::string& v) { c.*m = v; },
                         [m](const C& c) { return c.*m; }});
        };
        auto flag = [&k](std::string sec, std::string key, bool C::*m, std::string doc) {
            const std::string full = sec + "." + key;
            k.push_back({sec, key, std::move(doc), [m, full](C& c, const std::string& v) { c.*m = detail::parse_bool(full, v); },
                         [m](const C& c) { return std::string(c.*m ? "true" : "false"); }});
        };

        text("run", "preset", &C::preset, "base preset: constant|spinodal|stripe|custom");
        k.push_back({"run", "seed", "64-bit seed for the initial noise",
                     [](C& c, const std::string& v) { c.seed = detail::parse_int<std::uint64_t>("run.seed", v); },
                     [](const C& c) { return std::to_string(c.seed); }});

        integer("grid", "nx", &C::nx, "cells in x (>= 4)");
        integer("grid", "ny", &C::ny, "cells in y (>= 4)");
        num("grid", "lx", &C::lx, "domain width");
        num("grid", "ly", &C::ly, "domain height (cells must be square)");

        text("material", "potential", &C::potential, "log|flory");
        num("material", "theta", &C::theta, "temperature scale of the singular part");
        num("material", "theta_c", &C::theta_c, "concave quadratic part -theta_c/2 (s - mid)^2");
        text("material", "mobility", &C::mobility, "degenerate|reciprocal|logistic|constant");
        num("material", "m0", &C::m0, "value of the constant mobility");

        text("kernel", "shape", &C::kernel_shape, "gaussian|bump");
        num("kernel", "amplitude", &C::kernel_amplitude, "J(0); 0 disables the nonlocal term");
        num("kernel", "eps", &C::kernel_eps, "kernel length scale");

        flag("flow", "enabled", &C::flow, "solve the Brinkman problem each step");
        num("flow", "nu0", &C::nu0, "viscosity at s = -1");
        num("flow", "nu1", &C::nu1, "viscosity at s = +1");
        num("flow", "eta", &C::eta, "permeability drag");
        text("flow", "viscous_form", &C::viscous_form, "divgrad|symgrad");
        text("flow", "body_force", &C::body_force, "zero|constant|vortex");
        num("flow", "force_amp", &C::force_amp, "amplitude of the vortex body force");
        num("flow", "force_x", &C::force_x, "x component of the constant body force");
        num("flow", "force_y", &C::force_y, "y component of the constant body force");
        num("flow", "tol", &C::flow_tol, "max-norm tolerance on divergence and momentum residual");
        integer("flow", "max_iter", &C::flow_max_iter, "pressure iterations per solve");

        num("stepping", "dt", &C::dt, "initial step");
        num("stepping", "dt_min", &C::dt_min, "abort when a step this small fails");
        num("stepping", "dt_max", &C::dt_max, "largest step");
        num("stepping", "shrink", &C::shrink, "step reduction factor on guard-band rejection");
        num("stepping", "guard_band", &C::guard_band, "minimal distance from a pure phase");
        num("stepping", "t_end", &C::t_end, "final time");
        integer("stepping", "max_steps", &C::max_steps, "stop after this many accepted steps (0 = no limit)");
        text("stepping", "transport", &C::transport, "upwind|central");
        num("stepping", "cg_tol", &C::cg_tol, "relative tolerance of the implicit diffusion solve");

        text("initial", "type", &C::ic, "constant|noise|stripe|file");
        num("initial", "value", &C::ic_value, "constant value");
        num("initial", "mean", &C::ic_mean, "noise mean");
        num("initial", "amp", &C::ic_amp, "noise half-width");
        num("initial", "width", &C::ic_width, "stripe width");
        text("initial", "path", &C::ic_path, "CHBF file for type = file");

        text("output", "dir", &C::out_dir, "output directory");
        integer("output", "snapshot_every", &C::snapshot_every, "snapshot cadence in accepted steps");
        num("output", "snapshot_from", &C::snapshot_from, "no snapshots before this time");

        flag("degiorgi", "enabled", &C::degiorgi, "certify separation at the end of the run");
        num("degiorgi", "T", &C::dg_T, "final time of the analysis window");
        num("degiorgi", "tau_tilde", &C::dg_tau, "level spacing in time");
        text("degiorgi", "delta", &C::dg_delta, "separation margin, or 'scan'");
        integer("degiorgi", "n_max", &C::dg_n_max, "number of levels");
        return k;
    }();
    return keys;
}

inline const ConfigKey& find_key(std::string_view section, std::string_view key) {
    for (const auto& k : config_schema()) {
        if (k.section == section && k.key == key) return k;
    }
    throw ConfigError("unknown key '" + std::string(key) + "' in section [" + std::string(section) + "]");
}

// ---------------------------------------------------------------------------

inline SimConfig preset_config(std::string_view name) {
    SimConfig c;
    c.preset = std::string(name);
    if (name == "custom") return c;

    // Shared phase-separating material: log potential with a concave part,
    // degenerate mobility, Gaussian kernel with a(x) ~ 21 in the bulk. Only the
    // lowest box modes are unstable, so the mixture separates directly into its
    // final layout instead of coarsening late.
    auto separating = [](SimConfig& s) {
        s.potential = "log";
        s.theta = 1.0;
        s.theta_c = 4.7;
        s.mobility = "degenerate";
        s.kernel_shape = "gaussian";
        s.kernel_amplitude = 300.0;
        s.kernel_eps = 0.15;
        s.flow = true;
        s.nu0 = 1.0;
        s.nu1 = 2.0;
        s.eta = 1.0;
        s.dt = 1e-3;
        s.dt_max = 5e-3;
    };

    if (name == "constant") {
        // Convex potential: with the concave part on, 0.2 sits in the spinodal
        // region and rounding noise would grow into a separated state.
        separating(c);
        c.theta_c = 0.0;
        c.ic = "constant";
        c.ic_value = 0.2;
        c.t_end = 4.0;
        c.snapshot_every = 1;
        c.snapshot_from = 0.0;
        c.degiorgi = true;
        c.dg_T = 4.0;
        c.dg_tau = 1.0;
        c.dg_delta = "scan";
        c.dg_n_max = 6;
        return c;
    }
    if (name == "spinodal") {
        separating(c);
        c.ic = "noise";
        c.ic_mean = 0.1;
        c.ic_amp = 0.05;
        c.t_end = 10.0;
        c.snapshot_every = 1;
        c.snapshot_from = 6.9;
        c.degiorgi = true;
        c.dg_T = 10.0;
        c.dg_tau = 1.0;
        c.dg_delta = "scan";
        c.dg_n_max = 6;
        return c;
    }
    if (name == "stripe") {
        separating(c);
        c.ic = "stripe";
        c.ic_width = 0.4;
        c.body_force = "vortex";
        c.force_amp = 1.0;
        c.t_end = 4.0;
        c.snapshot_every = 1;
        c.snapshot_from = 0.9;
        c.degiorgi = true;
        c.dg_T = 4.0;
        c.dg_tau = 1.0;
        c.dg_delta = "scan";
        c.dg_n_max = 6;
        return c;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected constant|spinodal|stripe|custom)");
}

/// Checks ranges and enumerations; called before any field is allocated.
inline void validate_config(const SimConfig& c) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    auto one_of = [](const std::string& key, const std::string& v, std::initializer_list<const char*> opts) {
        for (const char* o : opts) {
            if (v == o) return;
        }
        std::string all;
        for (const char* o : opts) all += (all.empty() ? "" : "|") + std::string(o);
        throw ConfigError("key '" + key + "': '" + v + "' is not one of " + all);
    };
    require(c.nx >= 4 && c.ny >= 4, "grid needs nx, ny >= 4");
    require(c.lx > 0.0 && c.ly > 0.0, "grid sides must be positive");
    require(std::abs(c.lx / c.nx - c.ly / c.ny) <= 1e-12 * (c.lx / c.nx), "grid cells must be square");
    one_of("material.potential", c.potential, {"log", "flory"});
    one_of("material.mobility", c.mobility, {"degenerate", "reciprocal", "logistic", "constant"});
    require(c.theta > 0.0, "material.theta must be positive");
    require(c.theta_c >= 0.0, "material.theta_c must be non-negative");
    require(c.m0 > 0.0, "material.m0 must be positive");
    one_of("kernel.shape", c.kernel_shape, {"gaussian", "bump"});
    require(c.kernel_amplitude >= 0.0, "kernel.amplitude must be non-negative");
    require(c.kernel_eps > 0.0, "kernel.eps must be positive");
    require(c.nu0 > 0.0 && c.nu1 >= c.nu0, "flow needs 0 < nu0 <= nu1");
    require(c.eta >= 0.0, "flow.eta must be non-negative");
    one_of("flow.viscous_form", c.viscous_form, {"divgrad", "symgrad"});
    one_of("flow.body_force", c.body_force, {"zero", "constant", "vortex"});
    require(c.flow_tol > 0.0, "flow.tol must be positive");
    require(c.flow_max_iter > 0, "flow.max_iter must be positive");
    require(c.dt_min > 0.0 && c.dt_min <= c.dt && c.dt <= c.dt_max, "stepping needs 0 < dt_min <= dt <= dt_max");
    require(c.shrink > 0.0 && c.shrink < 1.0, "stepping.shrink must lie in (0,1)");
    require(c.guard_band >= 0.0, "stepping.guard_band must be non-negative");
    require(c.t_end > 0.0, "stepping.t_end must be positive");
    require(c.max_steps >= 0, "stepping.max_steps must be non-negative");
    one_of("stepping.transport", c.transport, {"upwind", "central"});
    require(c.cg_tol > 0.0 && c.cg_tol < 1.0, "stepping.cg_tol must lie in (0,1)");
    one_of("initial.type", c.ic, {"constant", "noise", "stripe", "file"});
    if (c.ic == "noise") {
        require(c.ic_amp >= 0.0, "initial.amp must be non-negative");
    }
    if (c.ic == "stripe") require(c.ic_width > 0.0, "initial.width must be positive");
    if (c.ic == "file") require(!c.ic_path.empty(), "initial.path is required for type = file");
    require(!c.out_dir.empty(), "output.dir must not be empty");
    require(c.snapshot_every >= 1, "output.snapshot_every must be >= 1");
    if (c.degiorgi) {
        require(c.dg_tau > 0.0 && c.dg_T > 3.0 * c.dg_tau, "degiorgi needs T > 3 tau_tilde > 0");
        require(c.dg_T <= c.t_end * (1.0 + 1e-12), "degiorgi.T must not exceed stepping.t_end");
        require(c.dg_n_max >= 3, "degiorgi.n_max must be >= 3");
        if (c.dg_delta != "scan") {
            const double d = detail::parse_double("degiorgi.delta", c.dg_delta);
            require(d > 0.0 && d < 0.25, "degiorgi.delta must lie in (0, 1/4) or be 'scan'");
        }
    }
}

/// Parses configuration text. Keys are applied on top of the preset named in
/// [run] preset (which must appear before any other key).
inline SimConfig parse_config(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line, section;
    std::vector<std::pair<std::string, std::string>> entries; // full key, value
    std::vector<int> lines;
    int lineno = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        const std::string s = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
            bool known = false;
            for (const auto& k : config_schema()) known = known || k.section == section;
            if (!known) throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside of a section");
        const std::string key = detail::trim(std::string_view(s).substr(0, eq));
        const std::string val = detail::trim(std::string_view(s).substr(eq + 1));
        try {
            find_key(section, key);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string full = section + "." + key;
        if (seen.count(full)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + full);
        seen[full] = lineno;
        if (full == "run.preset" && !entries.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": run.preset must precede all other keys");
        }
        entries.emplace_back(full, val);
        lines.push_back(lineno);
    }
    SimConfig cfg;
    std::size_t first = 0;
    if (!entries.empty() && entries.front().first == "run.preset") {
        cfg = preset_config(entries.front().second);
        first = 1;
    }
    for (std::size_t i = first; i < entries.size(); ++i) {
        const auto dot = entries[i].first.find('.');
        const auto& k = find_key(entries[i].first.substr(0, dot), entries[i].first.substr(dot + 1));
        try {
            k.set(cfg, entries[i].second);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lines[i]) + ": " + e.what());
        }
    }
    validate_config(cfg);
    return cfg;
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Full configuration with every key, suitable for parse_config.
inline std::string to_ini(const SimConfig& c) {
    std::ostringstream out;
    std::string section;
    for (const auto& k : config_schema()) {
        if (k.section == "run" && k.key == "preset") continue; // resolved values need no base
        if (k.section != section) {
            if (!section.empty()) out << '\n';
            section = k.section;
            out << '[' << section << "]\n";
        }
        out << k.key << " = " << k.get(c) << "\n";
    }
    return out.str();
}

} // namespace chb
