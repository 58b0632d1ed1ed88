#pragma once

// Builds a simulation from a SimConfig, runs the coupled phase/flow loop,
// optionally certifies separation, and writes the output directory.

#include <chb/brinkman.hpp>
#include <chb/chsolver.hpp>
#include <chb/config.hpp>
#include <chb/degiorgi.hpp>
#include <chb/diagnostics.hpp>
#include <chb/errors.hpp>
#include <chb/field_io.hpp>
#include <chb/grid.hpp>
#include <chb/kernel.hpp>
#include <chb/material.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace chb {

inline MaterialModel material_from(const SimConfig& c) {
    MaterialModel m;
    m.potential.variant = parse_potential(c.potential);
    m.potential.theta = c.theta;
    m.potential.theta_c = c.theta_c;
    m.mobility.variant = parse_mobility(c.mobility);
    m.mobility.m0 = c.m0;
    return m;
}

inline Grid2D grid_from(const SimConfig& c) { return Grid2D(c.nx, c.ny, c.lx, c.ly); }

/// Uniform double in [0,1) from the top 53 bits of the generator output.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline ScalarField initial_condition(const SimConfig& c, const Grid2D& g, const MaterialModel& model) {
    ScalarField phi(g);
    const auto& pot = model.potential;
    const double half = 0.5 * (pot.hi() - pot.lo());
    if (c.ic == "constant") {
        phi = ScalarField(g, c.ic_value);
    } else if (c.ic == "noise") {
        const double mean_s = (c.ic_mean - pot.mid()) / half;
        const double amp_s = c.ic_amp / half;
        if (!(amp_s + std::abs(mean_s) <= 0.95)) {
            throw ConfigError("initial noise needs amp + |mean| <= 0.95 (in the symmetric coordinate)");
        }
        std::mt19937_64 rng(c.seed);
        for (std::size_t k = 0; k < phi.size(); ++k) {
            const double v = c.ic_mean + c.ic_amp * (2.0 * unit_uniform(rng) - 1.0);
            phi[k] = std::clamp(v, c.ic_mean - c.ic_amp, c.ic_mean + c.ic_amp);
        }
    } else if (c.ic == "stripe") {
        // Vertical band of width `width` at +0.8, surrounded by -0.8, smoothed over two cells.
        const double w = 2.0 * g.h();
        phi = ScalarField::from_function(g, [&](double x, double) {
            const double s = 0.8 * std::tanh((0.5 * c.ic_width - std::abs(x - 0.5 * g.lx())) / w);
            return pot.mid() + half * s;
        });
    } else if (c.ic == "file") {
        phi = io::read_chbf(c.ic_path);
        if (!(phi.grid() == g)) throw GridMismatch("initial condition file grid differs from the configured grid");
    } else {
        throw ConfigError("unknown initial.type '" + c.ic + "'");
    }
    double sup = 0.0;
    for (double v : phi.values()) {
        if (!in_open_domain(model, v)) throw DomainError("initial condition leaves the open domain");
        sup = std::max(sup, std::abs((v - pot.mid()) / half));
    }
    if (!(sup < 1.0) || !(std::abs((mean(phi) - pot.mid()) / half) < 1.0)) {
        throw DomainError("initial condition must satisfy ||phi0||_inf < 1 and |mean phi0| < 1");
    }
    return phi;
}

struct RunResult {
    SimConfig config;
    MaterialModel model;
    ValidationReport validation;
    Trajectory trajectory;
    double initial_mass = 0.0;
    double max_mass_drift = 0.0; // max |int phi(t) - int phi0| / |int phi0 + 1|
    double max_cell_change = 0.0; // max |phi(t) - phi0| over all cells and steps
    double max_u = 0.0;           // max velocity magnitude over the run
    double max_pressure_iterations = 0.0;
    int accepted_steps = 0;
    int rejected_steps = 0;
    std::optional<SeparationCertificate> certificate;
    std::optional<DeltaScan> scan;
    std::optional<DeGiorgiConstants> constants;
    std::optional<F1Bound> f1_bound;
    bool omega1_all_pass = true;
};

struct RunHooks {
    /// Called after every accepted step with the new state.
    std::function<void(const ChState&, const FlowSolution&)> on_step;
};

namespace detail {

inline bool snapshot_due(const SimConfig& c, int step, double t) {
    return step % c.snapshot_every == 0 && t >= c.snapshot_from - 1e-12;
}

} // namespace detail

/// Certification over a completed trajectory.
inline void certify_run(RunResult& r, const Kernel& kernel) {
    const SimConfig& c = r.config;
    DeGiorgiParams p;
    p.T = c.dg_T;
    p.tau_tilde = c.dg_tau;
    p.n_max = c.dg_n_max;
    p.delta = 0.1;
    double C_tilde = 0.0;
    for (const auto& rec : r.trajectory.records()) {
        if (rec.t >= p.T - 3.0 * p.tau_tilde - 1e-12) C_tilde = std::max(C_tilde, rec.f1_l1);
    }
    r.constants = measure_constants(r.model, kernel, p.tau_tilde, C_tilde);
    const SortedSnapshots snaps(r.trajectory, r.model);
    if (c.dg_delta == "scan") {
        r.scan = scan_delta(snaps, p, r.model, *r.constants);
        p.delta = r.scan->best_delta > 0.0 ? r.scan->best_delta : r.scan->entries.front().delta;
    } else {
        p.delta = std::stod(c.dg_delta);
    }
    r.certificate = certify(snaps, p, r.model, *r.constants);
}

inline RunResult run(const SimConfig& cfg, const RunHooks& hooks = {}) {
    validate_config(cfg);
    RunResult r;
    r.config = cfg;
    const Grid2D g = grid_from(cfg);
    MaterialModel model = material_from(cfg);
    const Kernel kernel = build_kernel(g, parse_kernel_shape(cfg.kernel_shape), cfg.kernel_amplitude, cfg.kernel_eps);
    const ScalarField a = kernel.a_field();
    const auto [a_lo, a_hi] = std::minmax_element(a.values().begin(), a.values().end());
    r.validation = validate_assumptions(model, std::max(0.0, *a_lo), *a_hi);
    if (!r.validation.ok()) {
        throw AssumptionError("material assumptions fail: " + r.validation.failures());
    }
    model = with_measured_constants(model, r.validation);
    r.model = model;

    StepControl ctl;
    ctl.dt = cfg.dt;
    ctl.dt_min = cfg.dt_min;
    ctl.dt_max = cfg.dt_max;
    ctl.shrink_factor = cfg.shrink;
    ctl.guard_band = cfg.guard_band;
    validate_step_control(ctl);
    StepOptions sopts;
    sopts.transport = parse_transport(cfg.transport);
    sopts.cg_rel_tol = cfg.cg_tol;

    const ScalarField eta(g, cfg.eta);
    const StaggeredVectorField h = body_force(g, parse_body_force(cfg.body_force), cfg.force_amp, cfg.force_x, cfg.force_y);
    BrinkmanSolver flow;
    BrinkmanOptions fopts;
    fopts.tol = cfg.flow_tol;
    fopts.max_iter = cfg.flow_max_iter;
    fopts.form = parse_viscous_form(cfg.viscous_form);

    ChState state{initial_condition(cfg, g, model), 0.0};
    const ScalarField phi0 = state.phi;
    r.initial_mass = integrate(phi0);
    const double s_bar0 = mean(symmetric_coordinate(model, phi0));

    FlowSolution sol;
    auto solve_flow = [&]() {
        if (!cfg.flow) {
            sol = FlowSolution{StaggeredVectorField(g), ScalarField(g), 0.0, 0.0, 0};
            return;
        }
        const ScalarField mu = chemical_potential(state.phi, kernel, model);
        BrinkmanProblem prob{viscosity_of_phi(symmetric_coordinate(model, state.phi), cfg.nu0, cfg.nu1), eta,
                             assemble_forcing(mu, state.phi, h)};
        const ScalarField guess = sol.pi;
        sol = flow.solve(prob, fopts, guess.size() ? &guess : nullptr);
        r.max_u = std::max(r.max_u, sol.u.max_abs());
        r.max_pressure_iterations = std::max(r.max_pressure_iterations, static_cast<double>(sol.iterations));
    };
    auto observe = [&](int step_index) {
        r.trajectory.add_record(record(state, sol.u, kernel, model));
        const auto& rec = r.trajectory.records().back();
        r.max_mass_drift =
            std::max(r.max_mass_drift, std::abs(rec.mass - r.initial_mass) / std::abs(r.initial_mass + 1.0));
        for (std::size_t k = 0; k < phi0.size(); ++k) {
            r.max_cell_change = std::max(r.max_cell_change, std::abs(state.phi[k] - phi0[k]));
        }
        r.omega1_all_pass = r.omega1_all_pass && omega1_check(symmetric_coordinate(model, state.phi), s_bar0).pass;
        if (detail::snapshot_due(cfg, step_index, state.t)) r.trajectory.add_snapshot(state.t, state.phi);
    };

    solve_flow();
    observe(0);

    const double t_end = cfg.t_end;
    const double t_eps = 1e-12 * std::max(1.0, t_end);
    while (state.t < t_end - t_eps && (cfg.max_steps == 0 || r.accepted_steps < cfg.max_steps)) {
        StepControl trial = ctl;
        trial.dt = std::min(ctl.dt, t_end - state.t);
        ChState next;
        try {
            next = step(state, sol.u, kernel, model, trial, sopts);
        } catch (const GuardBandError&) {
            ++r.rejected_steps;
            ctl = adapt_dt(ctl, StepOutcome::GuardBand);
            continue;
        }
        ctl = adapt_dt(ctl, StepOutcome::Success);
        if (t_end - next.t <= t_eps) next.t = t_end;
        state = std::move(next);
        ++r.accepted_steps;
        solve_flow();
        observe(r.accepted_steps);
        if (hooks.on_step) hooks.on_step(state, sol);
    }
    // Always keep the final state.
    if (r.trajectory.snapshots().empty() || r.trajectory.snapshots().back().first < state.t) {
        r.trajectory.add_snapshot(state.t, state.phi);
    }

    if (r.trajectory.records().back().t >= 1.0 + 3.0 * 1e-9) {
        try {
            r.f1_bound = f1_uniform_bound(r.trajectory, 1.0, model.alpha1, g.area());
        } catch (const WindowError&) {
        }
    }
    if (cfg.degiorgi && state.t >= cfg.dg_T - t_eps) certify_run(r, kernel);
    return r;
}

// ---------------------------------------------------------------------------
// Output directory.

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out << s;
    if (!out) throw IoError("short write to " + p.string());
}

} // namespace detail

inline std::string diagnostics_csv(const Trajectory& traj) {
    std::string s;
    const auto& cols = diagnostics_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
    s += '\n';
    for (const auto& r : traj.records()) {
        const auto v = diagnostics_values(r);
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::fmt_double(v[i]);
        s += '\n';
    }
    return s;
}

inline nlohmann::json run_summary(const RunResult& r) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.validation.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    nlohmann::json j = {{"status", "ok"},
                        {"preset", r.config.preset},
                        {"seed", r.config.seed},
                        {"accepted_steps", r.accepted_steps},
                        {"rejected_steps", r.rejected_steps},
                        {"t_final", r.trajectory.records().back().t},
                        {"max_mass_drift", r.max_mass_drift},
                        {"max_cell_change", r.max_cell_change},
                        {"max_velocity", r.max_u},
                        {"max_pressure_iterations", r.max_pressure_iterations},
                        {"omega1_all_pass", r.omega1_all_pass},
                        {"alpha0", r.model.alpha0},
                        {"alpha1", r.model.alpha1},
                        {"assumptions", checks}};
    if (r.f1_bound) {
        j["f1_bound"] = {{"sup", r.f1_bound->sup_val},
                         {"first_window_max", r.f1_bound->first_window_max},
                         {"riccati_cap", r.f1_bound->riccati_cap},
                         {"pass", r.f1_bound->pass}};
    }
    if (r.scan) j["delta_scan"] = to_json(*r.scan);
    return j;
}

/// Writes diagnostics.csv, snapshots/, certificate.json, plots/, config.resolved.ini
/// and status.json under `dir`. Overwrites existing files.
inline void emit(const RunResult& r, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "snapshots", ec);
    fs::create_directories(dir / "plots", ec);
    if (!fs::is_directory(dir / "snapshots") || !fs::is_directory(dir / "plots")) {
        throw IoError("cannot create output directory " + dir.string());
    }
    detail::write_text(dir / "diagnostics.csv", diagnostics_csv(r.trajectory));

    std::string index = "index,t,file\n";
    const auto& snaps = r.trajectory.snapshots();
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%06zu.chbf", k);
        io::write_chbf(dir / "snapshots" / name, snaps[k].second);
        index += std::to_string(k) + "," + io::fmt_double(snaps[k].first) + "," + name + "\n";
    }
    detail::write_text(dir / "snapshots" / "index.csv", index);

    auto series = [&](const std::string& file, auto get) {
        std::string s;
        for (const auto& rec : r.trajectory.records()) s += io::fmt_double(rec.t) + " " + io::fmt_double(get(rec)) + "\n";
        detail::write_text(dir / "plots" / file, s);
    };
    series("sep_gap.dat", [](const DiagnosticsRecord& x) { return x.sep_gap; });
    series("f1_l1.dat", [](const DiagnosticsRecord& x) { return x.f1_l1; });
    {
        std::string s;
        try {
            for (const auto& w : dissipativity_scan(r.trajectory).windows) {
                s += io::fmt_double(w.t0) + " " + io::fmt_double(w.total) + "\n";
            }
        } catch (const WindowError&) {
            // shorter than one window: leave the file empty
        }
        detail::write_text(dir / "plots" / "energy_window.dat", s);
    }

    nlohmann::json cert = {{"schema", kCertificateSchema}, {"certified", false}};
    std::string yn;
    if (r.certificate) {
        cert = to_json(*r.certificate);
        cert["certified"] = true;
        if (r.scan) cert["scan"] = to_json(*r.scan);
        for (std::size_t n = 0; n < r.certificate->upper.y.size(); ++n) {
            yn += std::to_string(n) + " " +
                  io::fmt_double(std::max(r.certificate->upper.y[n], r.certificate->lower.y[n])) + "\n";
        }
    }
    detail::write_text(dir / "plots" / "y_n.dat", yn);
    detail::write_text(dir / "certificate.json", cert.dump(2) + "\n");
    detail::write_text(dir / "config.resolved.ini",
                       "# resolved from preset " + r.config.preset + "\n" + to_ini(r.config));
    detail::write_text(dir / "status.json", run_summary(r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Reloading a run directory for stand-alone certification.

inline Trajectory load_trajectory(const std::filesystem::path& dir) {
    Trajectory traj;
    {
        std::ifstream in(dir / "diagnostics.csv");
        if (!in) throw IoError("missing " + (dir / "diagnostics.csv").string());
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<double> v;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
            if (v.size() != diagnostics_columns().size()) throw IoError("malformed diagnostics.csv row");
            DiagnosticsRecord r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11]};
            traj.add_record(r);
        }
    }
    std::ifstream in(dir / "snapshots" / "index.csv");
    if (!in) throw IoError("missing snapshots/index.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(','), c2 = line.rfind(',');
        const double t = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        traj.add_snapshot(t, io::read_chbf(dir / "snapshots" / line.substr(c2 + 1)));
    }
    return traj;
}

} // namespace chb
