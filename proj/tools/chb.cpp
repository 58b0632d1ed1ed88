// Command-line front end: run, certify, validate, mms.

#include <chb/config.hpp>
#include <chb/degiorgi.hpp>
#include <chb/errors.hpp>
#include <chb/mms.hpp>
#include <chb/run.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::json;

int exit_code_for(const chb::Error& e) {
    const std::string k = e.kind();
    if (k == "ConfigError") return 2;
    if (k == "AssumptionError") return 3;
    if (k == "AbortRun") return 4;
    if (k == "SolverError") return 5;
    if (k == "CoverageError" || k == "WindowError") return 6;
    if (k == "IoError") return 7;
    return 1;
}

json failure(const chb::Error& e) { return {{"status", "error"}, {"kind", e.kind()}, {"reason", e.what()}}; }

int cmd_run(const std::string& config_path, const std::optional<std::string>& out,
            const std::optional<std::uint64_t>& seed) {
    std::filesystem::path dir;
    try {
        chb::SimConfig cfg = chb::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out) cfg.out_dir = *out;
        dir = cfg.out_dir;
        const chb::RunResult r = chb::run(cfg);
        chb::emit(r, dir);
        json summary = chb::run_summary(r);
        if (r.certificate) {
            summary["certificate"] = {{"delta", r.certificate->delta},
                                      {"mode", r.certificate->mode},
                                      {"pass", r.certificate->pass}};
        }
        std::cout << summary.dump(2) << "\n";
        return 0;
    } catch (const chb::Error& e) {
        const json j = failure(e);
        if (!dir.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            std::ofstream(dir / "status.json") << j.dump(2) << "\n";
        }
        std::cerr << j.dump() << "\n";
        return exit_code_for(e);
    }
}

int cmd_certify(const std::string& trajdir, double T, double tau, const std::optional<double>& delta, bool scan,
                int n_max) {
    try {
        const std::filesystem::path dir = trajdir;
        const chb::SimConfig cfg = chb::load_config((dir / "config.resolved.ini").string());
        const chb::RunResult base = [&] {
            chb::RunResult r;
            r.config = cfg;
            r.config.degiorgi = true;
            r.config.dg_T = T;
            r.config.dg_tau = tau;
            r.config.dg_n_max = n_max;
            r.config.dg_delta = scan || !delta ? "scan" : chb::io::fmt_double(*delta);
            return r;
        }();
        chb::RunResult r = base;
        chb::validate_config(r.config);
        const chb::Grid2D g = chb::grid_from(cfg);
        const chb::Kernel kernel =
            chb::build_kernel(g, chb::parse_kernel_shape(cfg.kernel_shape), cfg.kernel_amplitude, cfg.kernel_eps);
        r.model = chb::material_from(cfg);
        r.trajectory = chb::load_trajectory(dir);
        chb::certify_run(r, kernel);
        json j = chb::to_json(*r.certificate);
        if (r.scan) j["scan"] = chb::to_json(*r.scan);
        std::cout << j.dump(2) << "\n";
        return r.certificate->pass ? 0 : 8;
    } catch (const chb::Error& e) {
        std::cerr << failure(e).dump() << "\n";
        return exit_code_for(e);
    }
}

int cmd_validate(const std::string& config_path) {
    try {
        const chb::SimConfig cfg = chb::load_config(config_path);
        const chb::Grid2D g = chb::grid_from(cfg);
        const chb::Kernel kernel =
            chb::build_kernel(g, chb::parse_kernel_shape(cfg.kernel_shape), cfg.kernel_amplitude, cfg.kernel_eps);
        const chb::ScalarField a = kernel.a_field();
        const auto [lo, hi] = std::minmax_element(a.values().begin(), a.values().end());
        const chb::ValidationReport rep =
            chb::validate_assumptions(chb::material_from(cfg), std::max(0.0, *lo), *hi);
        json checks = json::array();
        for (const auto& c : rep.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        std::cout << json{{"ok", rep.ok()},
                          {"a_min", *lo},
                          {"a_max", *hi},
                          {"alpha0", rep.alpha0},
                          {"alpha1", rep.alpha1},
                          {"eps0", rep.eps0},
                          {"checks", checks}}
                         .dump(2)
                  << "\n";
        return rep.ok() ? 0 : 3;
    } catch (const chb::Error& e) {
        std::cerr << failure(e).dump() << "\n";
        return exit_code_for(e);
    }
}

int cmd_mms(const std::string& preset) {
    try {
        const chb::MmsStudy s = chb::mms_study(preset);
        std::cout << json{{"study", s.name},
                          {"sizes", s.sizes},
                          {"errors", s.errors},
                          {"ratios", s.ratios},
                          {"accepted_ratio_range", {s.ratio_lo, s.ratio_hi}},
                          {"pass", s.pass()}}
                         .dump(2)
                  << "\n";
        return s.pass() ? 0 : 9;
    } catch (const chb::Error& e) {
        std::cerr << failure(e).dump() << "\n";
        return exit_code_for(e);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal Cahn-Hilliard-Brinkman solver and separation analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir, trajdir, preset;
    std::uint64_t seed = 0;
    double T = 0.0, tau = 0.0, delta = 0.0;
    bool scan = false;
    int n_max = 6;

    auto* run = app.add_subcommand("run", "run a simulation and write its output directory");
    run->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides output.dir)");
    auto* seed_opt = run->add_option("--seed", seed, "seed (overrides run.seed)");

    auto* cert = app.add_subcommand("certify", "certify separation on a stored run directory");
    cert->add_option("trajdir", trajdir, "run output directory")->required()->check(CLI::ExistingDirectory);
    cert->add_option("--T", T, "final time of the analysis window")->required();
    cert->add_option("--tau", tau, "tau_tilde")->required();
    auto* delta_opt = cert->add_option("--delta", delta, "separation margin in (0, 1/4)");
    auto* scan_flag = cert->add_flag("--scan", scan, "scan delta over (1e-4, 0.25)");
    delta_opt->excludes(scan_flag);
    cert->add_option("--n-max", n_max, "number of levels")->check(CLI::Range(3, 30));

    auto* val = app.add_subcommand("validate", "check the material assumptions of a configuration");
    val->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);

    auto* mms = app.add_subcommand("mms", "run a manufactured-solution convergence study");
    mms->add_option("preset", preset, "mms-ch | mms-brinkman")->required();

    CLI11_PARSE(app, argc, argv);

    if (*run) {
        return cmd_run(config_path, *out_opt ? std::optional<std::string>(out_dir) : std::nullopt,
                       *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
    if (*cert) {
        if (!*delta_opt && !scan) {
            std::cerr << "certify: one of --delta or --scan is required\n";
            return 2;
        }
        return cmd_certify(trajdir, T, tau, *delta_opt ? std::optional<double>(delta) : std::nullopt, scan, n_max);
    }
    if (*val) return cmd_validate(config_path);
    if (*mms) return cmd_mms(preset);
    return 0;
}
