#ifndef WAIR_SCENARIO_HPP
#define WAIR_SCENARIO_HPP

// Scenario: everything needed to reproduce an episode. Files are JSON with the
// layout written by to_json(Scenario); every key is optional and falls back to
// the defaults below.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "wair/collocation.hpp"
#include "wair/nlp.hpp"
#include "wair/robot.hpp"
#include "wair/terrain.hpp"

namespace wair {

inline constexpr int kScenarioVersion = 1;

struct IntegrationOptions {
    double dt = 1e-3;
    double log_rate = 100.0;  // Hz
    /// Anchor check inside RK4 stages; stance legs are re-projected after every step.
    double anchor_tolerance = 1e-4;
    /// Largest allowed gap between a swing foot and its anchor at touchdown.
    double touchdown_tolerance = 1e-6;
    /// Any torso coordinate or rate beyond this magnitude counts as divergence.
    double divergence_limit = 1e3;
};

struct Scenario {
    std::string name = "custom";
    double duration = 6.0;
    Terrain terrain;
    RobotParams robot;
    ReferenceOptions reference;
    GaitOptions gait;
    CollocationOptions collocation;
    SolverOptions solver;
    IntegrationOptions integration;
    bool thrust = true;
    bool sagittal = true;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    void validate() const;
};

namespace detail {

inline double positive(const nlohmann::json& j, const char* key, double fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    const double v = number_from_json(j[key], path + "." + key);
    if (!(v > 0.0)) throw ConfigError(path + "." + key, "must be positive");
    return v;
}

inline const nlohmann::json& section(const nlohmann::json& j, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!j.contains(key)) return empty;
    if (!j[key].is_object()) throw ConfigError(key, "expected an object");
    return j[key];
}

inline bool flag(const nlohmann::json& j, const char* key, bool fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError(path + "." + key, "expected true or false");
    return j[key].get<bool>();
}

}  // namespace detail

inline void Scenario::validate() const {
    if (!(duration > 0.0)) throw ConfigError("duration", "must be positive");
    const auto& segs = terrain.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (!(segs[i].friction > 0.0))
            throw ConfigError("terrain.segments[" + std::to_string(i) + "].friction",
                              "friction coefficient must be positive");
        if (!(segs[i].friction - collocation.cone_margin > 0.0))
            throw ConfigError("terrain.segments[" + std::to_string(i) + "].friction",
                              "friction coefficient must exceed collocation.cone_margin");
    }
    terrain.validate();
    robot.validate();
    if (!(reference.speed > 0.0)) throw ConfigError("reference.speed", "must be positive");
    if (!(reference.body_height > 0.0)) throw ConfigError("reference.body_height", "must be positive");
    if (!(gait.period > 0.0)) throw ConfigError("gait.period", "must be positive");
    if (!(gait.clearance > 0.0)) throw ConfigError("gait.clearance", "must be positive");
    if (!(gait.lattice_spacing > 0.0)) throw ConfigError("gait.lattice_spacing", "must be positive");
    if (!(gait.lookahead >= 0.0)) throw ConfigError("gait.lookahead", "must be non-negative");
    GaitSchedule(gait.period, duration);
    collocation.validate();
    if (solver.max_outer < 1) throw ConfigError("solver.max_outer", "must be at least 1");
    if (solver.max_inner < 1) throw ConfigError("solver.max_inner", "must be at least 1");
    if (!(solver.tolerance > 0.0)) throw ConfigError("solver.tolerance", "must be positive");
    if (!(solver.jitter >= 0.0)) throw ConfigError("solver.jitter", "must be non-negative");
    const auto& in = integration;
    if (!(in.dt > 0.0)) throw ConfigError("integration.dt", "must be positive");
    const double steps = gait.period / in.dt;
    if (std::abs(steps - std::round(steps)) > 1e-6)
        throw ConfigError("integration.dt", "must divide the gait period");
    const double per_sample = 1.0 / (in.log_rate * in.dt);
    if (!(in.log_rate > 0.0) || per_sample < 1.0 - 1e-9 || std::abs(per_sample - std::round(per_sample)) > 1e-6)
        throw ConfigError("integration.log_rate", "sample period must be a whole number of steps");
    if (!(in.anchor_tolerance > 0.0)) throw ConfigError("integration.anchor_tolerance", "must be positive");
    if (!(in.touchdown_tolerance > 0.0)) throw ConfigError("integration.touchdown_tolerance", "must be positive");
    // Cross-check the reference against the terrain (overlapping blends etc.).
    ReferenceTrajectory(terrain, reference);
}

inline nlohmann::json to_json(const SolverOptions& o) {
    return {{"max_outer", o.max_outer},
            {"max_inner", o.max_inner},
            {"tolerance", o.tolerance},
            {"optimality_tolerance", o.optimality_tolerance},
            {"initial_penalty", o.initial_penalty},
            {"penalty_growth", o.penalty_growth},
            {"max_penalty", o.max_penalty},
            {"multiplier_bound", o.multiplier_bound},
            {"lbfgs_memory", o.lbfgs_memory},
            {"fd_step", o.fd_step},
            {"jitter", o.jitter}};
}

inline SolverOptions solver_options_from_json(const nlohmann::json& j, SolverOptions o = {}) {
    auto integer = [&](const char* key, int& v) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer()) throw ConfigError(std::string("solver.") + key, "expected an integer");
        v = j[key].get<int>();
    };
    auto num = [&](const char* key, double& v) {
        if (j.contains(key)) v = detail::number_from_json(j[key], std::string("solver.") + key);
    };
    integer("max_outer", o.max_outer);
    integer("max_inner", o.max_inner);
    integer("lbfgs_memory", o.lbfgs_memory);
    num("tolerance", o.tolerance);
    num("optimality_tolerance", o.optimality_tolerance);
    num("initial_penalty", o.initial_penalty);
    num("penalty_growth", o.penalty_growth);
    num("max_penalty", o.max_penalty);
    num("multiplier_bound", o.multiplier_bound);
    num("fd_step", o.fd_step);
    num("jitter", o.jitter);
    return o;
}

/// Serialized scenario. `with_output` drops the output directory, which is not
/// part of the provenance hash.
inline nlohmann::json to_json(const Scenario& s, bool with_output = true) {
    nlohmann::json j;
    j["version"] = kScenarioVersion;
    j["name"] = s.name;
    j["duration"] = s.duration;
    j["terrain"] = to_json(s.terrain);
    j["robot"] = to_json(s.robot);
    j["reference"] = {{"speed", s.reference.speed},
                      {"body_height", s.reference.body_height},
                      {"blend_window", s.reference.blend_window},
                      {"start_x", s.reference.start_x},
                      {"lateral_y", s.reference.lateral_y}};
    j["gait"] = {{"period", s.gait.period},
                 {"clearance", s.gait.clearance},
                 {"lattice_spacing", s.gait.lattice_spacing},
                 {"lookahead", s.gait.lookahead}};
    j["collocation"] = to_json(s.collocation);
    j["solver"] = to_json(s.solver);
    j["integration"] = {{"dt", s.integration.dt},
                        {"log_rate", s.integration.log_rate},
                        {"anchor_tolerance", s.integration.anchor_tolerance},
                        {"touchdown_tolerance", s.integration.touchdown_tolerance},
                        {"divergence_limit", s.integration.divergence_limit}};
    j["toggles"] = {{"thrust", s.thrust}, {"sagittal", s.sagittal}};
    j["seed"] = s.seed;
    if (with_output) j["output"] = {{"dir", s.output_dir}};
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scenario", "expected a JSON object");
    if (j.contains("version") && j["version"] != kScenarioVersion)
        throw ConfigError("version", "unsupported scenario version (expected 1)");
    Scenario s;
    s.name = j.value("name", s.name);
    if (j.contains("duration")) s.duration = detail::number_from_json(j["duration"], "duration");

    if (j.contains("terrain")) {
        const auto& t = j["terrain"];
        if (t.is_object() && t.contains("segments") && t["segments"].is_array()) {
            for (std::size_t i = 0; i < t["segments"].size(); ++i) {
                const auto& seg = t["segments"][i];
                if (seg.is_object() && seg.contains("friction") &&
                    !(detail::number_from_json(seg["friction"], "terrain.segments[" + std::to_string(i) + "].friction") >
                      0.0))
                    throw ConfigError("terrain.segments[" + std::to_string(i) + "].friction",
                                      "friction coefficient must be positive");
            }
        }
        s.terrain = terrain_from_json(t);
    }
    if (j.contains("robot")) s.robot = robot_params_from_json(j["robot"]);

    const auto& r = detail::section(j, "reference");
    s.reference.speed = detail::positive(r, "speed", s.reference.speed, "reference");
    s.reference.body_height = detail::positive(r, "body_height", s.reference.body_height, "reference");
    if (r.contains("blend_window"))
        s.reference.blend_window = detail::number_from_json(r["blend_window"], "reference.blend_window");
    if (r.contains("start_x")) s.reference.start_x = detail::number_from_json(r["start_x"], "reference.start_x");
    if (r.contains("lateral_y")) s.reference.lateral_y = detail::number_from_json(r["lateral_y"], "reference.lateral_y");

    const auto& g = detail::section(j, "gait");
    s.gait.period = detail::positive(g, "period", s.gait.period, "gait");
    s.gait.clearance = detail::positive(g, "clearance", s.gait.clearance, "gait");
    s.gait.lattice_spacing = detail::positive(g, "lattice_spacing", s.gait.lattice_spacing, "gait");
    if (g.contains("lookahead")) s.gait.lookahead = detail::number_from_json(g["lookahead"], "gait.lookahead");

    if (j.contains("collocation")) s.collocation = collocation_options_from_json(j["collocation"]);
    if (j.contains("solver")) s.solver = solver_options_from_json(j["solver"]);

    const auto& in = detail::section(j, "integration");
    s.integration.dt = detail::positive(in, "dt", s.integration.dt, "integration");
    s.integration.log_rate = detail::positive(in, "log_rate", s.integration.log_rate, "integration");
    s.integration.anchor_tolerance =
        detail::positive(in, "anchor_tolerance", s.integration.anchor_tolerance, "integration");
    s.integration.touchdown_tolerance =
        detail::positive(in, "touchdown_tolerance", s.integration.touchdown_tolerance, "integration");
    s.integration.divergence_limit =
        detail::positive(in, "divergence_limit", s.integration.divergence_limit, "integration");

    const auto& tg = detail::section(j, "toggles");
    s.thrust = detail::flag(tg, "thrust", s.thrust, "toggles");
    s.sagittal = detail::flag(tg, "sagittal", s.sagittal, "toggles");

    const auto& out = detail::section(j, "output");
    s.output_dir = out.value("dir", s.output_dir);
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
        s.seed = j["seed"].get<std::uint64_t>();
    }
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("scenario", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("scenario", path + ": " + e.what());
    }
    return scenario_from_json(j);
}

/// FNV-1a 64 of the canonical (sorted-key, compact) JSON without output paths.
inline std::uint64_t scenario_hash(const Scenario& s) {
    const std::string text = to_json(s, false).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string scenario_hash_hex(const Scenario& s) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << scenario_hash(s);
    return os.str();
}

/// 30 deg incline, mu = 0.35, 6 s: 2 s on the flat then 1.5 m up the slope.
inline Scenario wair30_scenario() {
    Scenario s;
    s.name = "wair30";
    s.duration = 6.0;
    const double slope = std::numbers::pi / 6.0;
    const double junction = 0.75 + s.reference.body_height * std::tan(slope / 2.0);
    s.terrain = Terrain::flat_then_slope(junction, slope, 0.35);
    s.collocation.model.sagittal = true;
    s.sagittal = true;
    s.thrust = true;
    s.output_dir = "out/wair30";
    return s;
}

}  // namespace wair

#endif  // WAIR_SCENARIO_HPP
