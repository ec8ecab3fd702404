#ifndef WAIR_EXPORT_HPP
#define WAIR_EXPORT_HPP

// Trajectory files. Every CSV starts with one comment line
//   # wair <table> v1 scenario=<name> scenario_hash=<16 hex digits>
// followed by a header row and one row per sample. Numbers are written in
// shortest round-trip form; non-finite values as inf, -inf or nan.
// Column layouts are fixed by the *_columns() functions below.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wair/episode.hpp"

namespace wair {

class ExportError : public Error {
public:
    using Error::Error;
};

enum class ExportFormat { Csv, Json };

namespace detail {

inline const std::array<const char*, kLegCount> kLegNames{"FR", "HR", "FL", "HL"};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline double parse_number(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ExportError("not a number: '" + s + "'");
    return v;
}

/// RFC 4180 field quoting (only needed for text fields).
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<std::string> per_leg(std::initializer_list<const char*> fields) {
    std::vector<std::string> out;
    for (const char* leg : kLegNames)
        for (const char* f : fields) out.push_back(std::string(leg) + "_" + f);
    return out;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline const std::vector<std::string> kBodyColumns{"x",       "y",         "z",          "yaw",
                                                   "pitch",   "roll",      "vx",         "vy",
                                                   "vz",      "yaw_rate",  "pitch_rate", "roll_rate"};

}  // namespace detail

inline std::vector<std::string> body_states_columns() {
    return detail::concat(detail::concat({"t", "phase"}, detail::kBodyColumns),
                          {"kinetic_energy", "potential_energy", "total_energy"});
}

inline std::vector<std::string> grf_columns() {
    return detail::concat({"t", "phase"}, detail::per_leg({"stance", "fx", "fy", "fz", "normal", "tangential"}));
}

inline std::vector<std::string> thrust_wrench_columns() { return {"t", "phase", "fx", "fy", "fz", "mx", "my", "mz"}; }

inline std::vector<std::string> friction_ratio_columns() {
    return detail::concat({"t", "phase"}, detail::per_leg({"stance", "ratio", "normal_margin", "cone_margin"}));
}

inline std::vector<std::string> trajectory_columns() {
    auto c = detail::concat({"t", "phase"}, detail::kBodyColumns);
    c = detail::concat(c, detail::per_leg({"phi", "gamma", "length"}));
    c = detail::concat(c, {"thrust_fx", "thrust_fy", "thrust_fz", "thrust_mx", "thrust_my", "thrust_mz"});
    c = detail::concat(c, detail::per_leg({"stance", "foot_x", "foot_y", "foot_z", "fx", "fy", "fz", "normal",
                                           "tangential", "ratio"}));
    return detail::concat(c, {"kinetic_energy", "potential_energy", "kkt_residual"});
}

namespace detail {

inline std::vector<double> body_row(const TrajectorySample& s) {
    std::vector<double> r{s.t, static_cast<double>(s.phase)};
    const Vec6 q = s.state.body_pose(), v = s.state.body_twist();
    for (int i = 0; i < 6; ++i) r.push_back(q[i]);
    for (int i = 0; i < 6; ++i) r.push_back(v[i]);
    return r;
}

inline std::vector<double> body_states_row(const TrajectorySample& s) {
    auto r = body_row(s);
    r.insert(r.end(), {s.kinetic_energy, s.potential_energy, s.kinetic_energy + s.potential_energy});
    return r;
}

inline std::vector<double> grf_row(const TrajectorySample& s) {
    std::vector<double> r{s.t, static_cast<double>(s.phase)};
    for (const FootSample& f : s.feet)
        r.insert(r.end(), {f.stance ? 1.0 : 0.0, f.force.x(), f.force.y(), f.force.z(), f.normal_force,
                           f.tangential_force});
    return r;
}

inline std::vector<double> thrust_row(const TrajectorySample& s) {
    std::vector<double> r{s.t, static_cast<double>(s.phase)};
    for (int i = 0; i < 6; ++i) r.push_back(s.wrench[i]);
    return r;
}

inline std::vector<double> friction_row(const TrajectorySample& s) {
    std::vector<double> r{s.t, static_cast<double>(s.phase)};
    for (const FootSample& f : s.feet)
        r.insert(r.end(), {f.stance ? 1.0 : 0.0, f.friction_ratio, f.normal_margin, f.cone_margin});
    return r;
}

inline std::vector<double> trajectory_row(const TrajectorySample& s) {
    auto r = body_row(s);
    for (Leg leg : kAllLegs) {
        const Vec3 q = s.state.leg(leg).joints();
        r.insert(r.end(), {q[0], q[1], q[2]});
    }
    for (int i = 0; i < 6; ++i) r.push_back(s.wrench[i]);
    for (const FootSample& f : s.feet)
        r.insert(r.end(), {f.stance ? 1.0 : 0.0, f.position.x(), f.position.y(), f.position.z(), f.force.x(),
                           f.force.y(), f.force.z(), f.normal_force, f.tangential_force, f.friction_ratio});
    r.insert(r.end(), {s.kinetic_energy, s.potential_energy, s.kkt_residual});
    return r;
}

struct TableDef {
    const char* name;
    std::vector<std::string> (*columns)();
    std::vector<double> (*row)(const TrajectorySample&);
};

inline const std::vector<TableDef>& tables() {
    static const std::vector<TableDef> t{{"body_states", body_states_columns, body_states_row},
                                          {"grf", grf_columns, grf_row},
                                          {"thrust_wrench", thrust_wrench_columns, thrust_row},
                                          {"friction_ratio", friction_ratio_columns, friction_row},
                                          {"trajectory", trajectory_columns, trajectory_row}};
    return t;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ExportError("cannot write " + path.string());
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw ExportError("write failed for " + path.string());
}

inline nlohmann::json phase_to_json(const PhaseRecord& r) {
    nlohmann::json j{{"index", r.index},
                     {"t_start", r.t_start},
                     {"t_end", r.t_end},
                     {"solved", r.solved},
                     {"max_anchor_drift", r.max_anchor_drift},
                     {"max_kkt_residual", r.max_kkt_residual},
                     {"touchdown_gap", r.touchdown_gap},
                     {"touchdown_speed", r.touchdown_speed},
                     {"node_times", r.node_times}};
    if (r.solved) j["report"] = to_json(r.report);
    nlohmann::json u = nlohmann::json::array();
    for (const Vec6& v : r.node_thrust) u.push_back(std::vector<double>(v.data(), v.data() + 6));
    j["node_thrust"] = u;
    return j;
}

}  // namespace detail

/// Header comment line shared by every table.
inline std::string export_header(const std::string& table, const std::string& scenario_name,
                                 const std::string& hash) {
    return "# wair " + table + " v1 scenario=" + detail::csv_field(scenario_name) + " scenario_hash=" + hash;
}

/// Episode summary: scenario, provenance hash, per-phase solver reports and
/// diagnostics, foothold plan. Contains no wall-clock data.
inline nlohmann::json episode_log(const Trajectory& tr, const Scenario& sc) {
    nlohmann::json j;
    j["format"] = "wair-episode-1";
    j["scenario"] = to_json(sc, false);
    j["scenario_hash"] = tr.scenario_hash;
    j["complete"] = tr.complete;
    j["samples"] = tr.samples.size();
    j["sample_period"] = tr.sample_period;
    j["slope_start"] = std::isfinite(tr.slope_start) ? nlohmann::json(tr.slope_start) : nlohmann::json(nullptr);
    j["flat_end"] = tr.flat_end;
    j["max_kkt_residual"] = tr.max_kkt_residual;
    j["accel_calls"] = tr.accel_calls;
    nlohmann::json ph = nlohmann::json::array();
    for (const PhaseRecord& r : tr.phases) ph.push_back(detail::phase_to_json(r));
    j["phases"] = ph;
    j["footholds"] = to_json(tr.plan);
    return j;
}

/// Writes the tables (CSV or one structured JSON file), the episode log and the
/// per-phase solver iteration logs under `dir`. Returns the files written.
inline std::vector<std::filesystem::path> export_trajectory(const Trajectory& tr, const Scenario& sc,
                                                            const std::filesystem::path& dir,
                                                            ExportFormat format = ExportFormat::Csv) {
    namespace fs = std::filesystem;
    if (tr.samples.empty()) throw ExportError("nothing to export: trajectory has no samples");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ExportError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<fs::path> written;

    if (format == ExportFormat::Csv) {
        for (const auto& tbl : detail::tables()) {
            const fs::path path = dir / (std::string(tbl.name) + ".csv");
            std::ofstream out = detail::open_for_write(path);
            out << export_header(tbl.name, sc.name, tr.scenario_hash) << '\n';
            const auto cols = tbl.columns();
            for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
            out << '\n';
            for (const TrajectorySample& s : tr.samples) {
                const auto row = tbl.row(s);
                for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << detail::format_number(row[i]);
                out << '\n';
            }
            detail::finish(out, path);
            written.push_back(path);
        }
    } else {
        nlohmann::json j;
        j["format"] = "wair-trajectory-1";
        j["scenario"] = sc.name;
        j["scenario_hash"] = tr.scenario_hash;
        for (const auto& tbl : detail::tables()) {
            nlohmann::json t;
            t["columns"] = tbl.columns();
            nlohmann::json rows = nlohmann::json::array();
            for (const TrajectorySample& s : tr.samples) {
                nlohmann::json row = nlohmann::json::array();
                for (double v : tbl.row(s)) row.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(detail::format_number(v)));
                rows.push_back(row);
            }
            t["rows"] = rows;
            j["tables"][tbl.name] = t;
        }
        const fs::path path = dir / "trajectory.json";
        std::ofstream out = detail::open_for_write(path);
        out << j.dump(1) << '\n';
        detail::finish(out, path);
        written.push_back(path);
    }

    const fs::path log_path = dir / "episode.json";
    std::ofstream log = detail::open_for_write(log_path);
    log << episode_log(tr, sc).dump(2) << '\n';
    detail::finish(log, log_path);
    written.push_back(log_path);

    bool any_solver_log = false;
    for (const PhaseRecord& r : tr.phases) any_solver_log = any_solver_log || r.solved;
    if (any_solver_log) {
        const fs::path sdir = dir / "solver";
        fs::create_directories(sdir, ec);
        if (ec) throw ExportError("cannot create " + sdir.string() + ": " + ec.message());
        for (const PhaseRecord& r : tr.phases) {
            if (!r.solved) continue;
            std::ostringstream name;
            name << "phase_" << std::setw(2) << std::setfill('0') << r.index << ".jsonl";
            const fs::path path = sdir / name.str();
            std::ofstream out = detail::open_for_write(path);
            out << r.solver_log;
            detail::finish(out, path);
            written.push_back(path);
        }
    }
    return written;
}

/// Parsed CSV table.
struct CsvTable {
    std::map<std::string, std::string> header;  // key=value pairs of the comment line
    std::string table;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw ExportError("no column named " + name);
    }
    double at(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ExportError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# wair ", 0) != 0)
        throw ExportError(path.string() + ": missing '# wair' header line");
    {
        std::istringstream hs(line.substr(7));
        std::string word;
        hs >> t.table;
        while (hs >> word) {
            const auto eq = word.find('=');
            if (eq != std::string::npos) t.header[word.substr(0, eq)] = word.substr(eq + 1);
        }
    }
    if (!std::getline(in, line)) throw ExportError(path.string() + ": missing column header");
    t.columns = detail::split_csv_line(line);
    std::size_t n = 2;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != t.columns.size())
            throw ExportError(path.string() + ":" + std::to_string(n) + ": expected " +
                              std::to_string(t.columns.size()) + " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(detail::parse_number(f));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace wair

#endif  // WAIR_EXPORT_HPP
