// wair_sim: run scenarios, validate configs, reproduce the slope climb.
//
// Exit codes: 0 ok, 1 bad input, 2 NLP failed (partial trajectory written),
// 3 any other runtime failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

#include "wair/wair.hpp"

namespace {

struct Overrides {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<int> nodes;
    bool no_thrust = false;
    std::string format = "csv";
};

void apply(wair::Scenario& sc, const Overrides& o) {
    if (!o.out.empty()) sc.output_dir = o.out;
    if (o.seed) sc.seed = *o.seed;
    if (o.dt) sc.integration.dt = *o.dt;
    if (o.nodes) sc.collocation.nodes = *o.nodes;
    if (o.no_thrust) sc.thrust = false;
    sc.validate();
}

void summarize(const wair::Trajectory& tr, const wair::Scenario& sc) {
    double min_normal = std::numeric_limits<double>::infinity(), max_ratio = 0.0, max_flat_thrust = 0.0;
    for (const auto& s : tr.samples) {
        if (tr.in_slope_phase(s.t))
            for (const auto& f : s.feet)
                if (f.stance) {
                    min_normal = std::min(min_normal, f.normal_force);
                    max_ratio = std::max(max_ratio, f.friction_ratio);
                }
        if (tr.in_flat_window(s.t)) max_flat_thrust = std::max(max_flat_thrust, s.wrench.head<3>().norm());
    }
    std::printf("scenario       %s\n", sc.name.c_str());
    std::printf("scenario_hash  %s\n", tr.scenario_hash.c_str());
    std::printf("thrust         %s\n", sc.thrust ? "on" : "off");
    std::printf("samples        %zu (%s)\n", tr.samples.size(), tr.complete ? "complete" : "partial");
    std::printf("phases         %zu\n", tr.phases.size());
    if (std::isfinite(min_normal)) {
        std::printf("slope min normal force  %.3f N\n", min_normal);
        std::printf("slope max |ft|/fn       %.4f\n", max_ratio);
    }
    std::printf("flat max |thrust force| %.3g N\n", max_flat_thrust);
    std::printf("max KKT residual        %.3g\n", tr.max_kkt_residual);
}

int simulate(wair::Scenario sc, const Overrides& o) {
    apply(sc, o);
    const auto fmt = o.format == "json" ? wair::ExportFormat::Json : wair::ExportFormat::Csv;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const wair::Trajectory tr = wair::run_episode(sc);
        wair::export_trajectory(tr, sc, sc.output_dir, fmt);
        summarize(tr, sc);
        std::printf("output         %s\n", sc.output_dir.c_str());
    } catch (const wair::PhaseSolveFailed& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (e.partial() && !e.partial()->samples.empty()) {
            wair::export_trajectory(*e.partial(), sc, sc.output_dir, fmt);
            std::fprintf(stderr, "partial trajectory written to %s\n", sc.output_dir.c_str());
        }
        return 2;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "wall time %.1f s\n", secs);
    return 0;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--dt", o.dt, "integration step [s]")->check(CLI::PositiveNumber);
    cmd->add_option("--nodes", o.nodes, "collocation nodes per phase")->check(CLI::Range(2, 1000));
    cmd->add_flag("--no-thrust", o.no_thrust, "disable the thrust wrench");
    cmd->add_option("--format", o.format, "table format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thrust-assisted quadruped locomotion simulator"};
    app.require_subcommand(1);

    Overrides run_opts, repro_opts;
    std::string run_file, check_file, repro_name;
    bool print_config = false;

    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("file", run_file, "scenario JSON")->required();
    add_overrides(run, run_opts);

    auto* check = app.add_subcommand("check", "validate a scenario file");
    check->add_option("file", check_file, "scenario JSON")->required();

    auto* repro = app.add_subcommand("repro", "run a built-in scenario");
    repro->add_option("name", repro_name, "scenario name")->required()->check(CLI::IsMember({"wair30"}));
    repro->add_flag("--print-config", print_config, "print the scenario JSON and exit");
    add_overrides(repro, repro_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return simulate(wair::load_scenario(run_file), run_opts);
        if (*check) {
            const wair::Scenario sc = wair::load_scenario(check_file);
            std::printf("ok %s %s\n", sc.name.c_str(), wair::scenario_hash_hex(sc).c_str());
            return 0;
        }
        wair::Scenario sc = wair::wair30_scenario();
        if (repro_opts.no_thrust) {
            sc.name = "wair30-nothrust";
            sc.output_dir = "out/wair30-nothrust";
        }
        if (print_config) {
            apply(sc, repro_opts);
            std::cout << wair::to_json(sc).dump(2) << '\n';
            return 0;
        }
        return simulate(sc, repro_opts);
    } catch (const wair::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
