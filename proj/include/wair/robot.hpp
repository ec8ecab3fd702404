#ifndef WAIR_ROBOT_HPP
#define WAIR_ROBOT_HPP

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>

#include "wair/errors.hpp"
#include "wair/spatial.hpp"

namespace wair {

/// Legs (and the thruster mounted next to each hip) in the order FR, HR, FL, HL.
enum class Leg : int { FR = 0, HR = 1, FL = 2, HL = 3 };

inline constexpr int kLegCount = 4;
inline constexpr std::array<Leg, kLegCount> kAllLegs{Leg::FR, Leg::HR, Leg::FL, Leg::HL};

constexpr int index(Leg leg) { return static_cast<int>(leg); }

constexpr std::string_view name(Leg leg) {
    constexpr std::array<std::string_view, kLegCount> names{"FR", "HR", "FL", "HL"};
    return names[index(leg)];
}

inline Leg leg_from_name(std::string_view s) {
    for (Leg leg : kAllLegs) {
        if (name(leg) == s) return leg;
    }
    throw ConfigError(std::string(s), "unknown leg name (expected FR, HR, FL or HL)");
}

/// Physical description of the reduced-order model. Defaults are desk-scale
/// configuration values, not measured hardware numbers.
struct RobotParams {
    double body_mass = 11.5;
    Mat3 body_inertia = Eigen::Vector3d(0.25, 0.35, 0.30).asDiagonal();
    std::array<Vec3, kLegCount> hip_offsets{Vec3(0.22, -0.11, -0.05), Vec3(-0.22, -0.11, -0.05),
                                            Vec3(0.22, 0.11, -0.05), Vec3(-0.22, 0.11, -0.05)};
    std::array<Vec3, kLegCount> thruster_offsets{Vec3(0.15, -0.15, 0.06), Vec3(-0.15, -0.15, 0.06),
                                                 Vec3(0.15, 0.15, 0.06), Vec3(-0.15, 0.15, 0.06)};
    double leg_length_min = 0.15;
    double leg_length_max = 0.45;
    Vec3 gravity{0.0, 0.0, -9.81};

    const Vec3& hip(Leg leg) const { return hip_offsets[index(leg)]; }
    double weight() const { return body_mass * gravity.norm(); }

    void validate() const {
        if (!(body_mass > 0.0) || !std::isfinite(body_mass))
            throw ConfigError("body_mass", "must be a positive finite mass");
        if ((body_inertia - body_inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw ConfigError("body_inertia", "must be symmetric");
        if (Eigen::SelfAdjointEigenSolver<Mat3>(body_inertia).eigenvalues().minCoeff() <= 0.0)
            throw ConfigError("body_inertia", "must be positive definite");
        if (!(leg_length_min > 0.0 && leg_length_min < leg_length_max))
            throw ConfigError("leg_length_range", "requires 0 < l_min < l_max");
        for (Leg leg : kAllLegs) {
            if (!(hip(leg).z() < 0.0))
                throw ConfigError("hip_offsets." + std::string(name(leg)),
                                  "hips sit at the lower corners of the torso (negative body z)");
        }
        if (!gravity.allFinite()) throw ConfigError("gravity", "must be finite");
    }
};

// ---------------------------------------------------------------------------
// JSON schema (SI units):
//   {
//     "body_mass": 11.5,
//     "body_inertia": [[ixx, ixy, ixz], [iyx, iyy, iyz], [izx, izy, izz]]  (or [ixx, iyy, izz]),
//     "hip_offsets": {"FR": [x, y, z], "HR": [...], "FL": [...], "HL": [...]},
//     "thruster_offsets": {"FR": [...], ...},
//     "leg_length_range": [l_min, l_max],
//     "gravity": [gx, gy, gz]
//   }
// Every key is optional; missing keys keep their defaults.
// ---------------------------------------------------------------------------

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(field, "expected an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw ConfigError(field, "expected numbers");
        v[i] = j[i].get<double>();
    }
    return v;
}

inline nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

inline double number_from_json(const nlohmann::json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError(field, "expected a number");
    return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const RobotParams& p) {
    nlohmann::json j;
    j["body_mass"] = p.body_mass;
    nlohmann::json inertia = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) inertia.push_back(detail::vec3_to_json(p.body_inertia.row(r).transpose()));
    j["body_inertia"] = inertia;
    for (Leg leg : kAllLegs) {
        j["hip_offsets"][std::string(name(leg))] = detail::vec3_to_json(p.hip_offsets[index(leg)]);
        j["thruster_offsets"][std::string(name(leg))] = detail::vec3_to_json(p.thruster_offsets[index(leg)]);
    }
    j["leg_length_range"] = {p.leg_length_min, p.leg_length_max};
    j["gravity"] = detail::vec3_to_json(p.gravity);
    return j;
}

inline RobotParams robot_params_from_json(const nlohmann::json& j) {
    RobotParams p;
    if (!j.is_object()) throw ConfigError("robot", "expected an object");
    if (j.contains("body_mass")) p.body_mass = detail::number_from_json(j["body_mass"], "body_mass");
    if (j.contains("body_inertia")) {
        const auto& ji = j["body_inertia"];
        if (ji.is_array() && ji.size() == 3 && ji[0].is_number()) {
            p.body_inertia = detail::vec3_from_json(ji, "body_inertia").asDiagonal();
        } else if (ji.is_array() && ji.size() == 3) {
            for (int r = 0; r < 3; ++r)
                p.body_inertia.row(r) = detail::vec3_from_json(ji[r], "body_inertia").transpose();
        } else {
            throw ConfigError("body_inertia", "expected [ixx, iyy, izz] or a 3x3 array");
        }
    }
    for (const char* key : {"hip_offsets", "thruster_offsets"}) {
        if (!j.contains(key)) continue;
        auto& target = std::string(key) == "hip_offsets" ? p.hip_offsets : p.thruster_offsets;
        for (const auto& [leg_name, value] : j[key].items()) {
            const Leg leg = leg_from_name(leg_name);
            target[index(leg)] = detail::vec3_from_json(value, std::string(key) + "." + leg_name);
        }
    }
    if (j.contains("leg_length_range")) {
        const auto& r = j["leg_length_range"];
        if (!r.is_array() || r.size() != 2) throw ConfigError("leg_length_range", "expected [l_min, l_max]");
        p.leg_length_min = detail::number_from_json(r[0], "leg_length_range");
        p.leg_length_max = detail::number_from_json(r[1], "leg_length_range");
    }
    if (j.contains("gravity")) p.gravity = detail::vec3_from_json(j["gravity"], "gravity");
    p.validate();
    return p;
}

inline RobotParams load_robot_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open robot parameter file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path, e.what());
    }
    return robot_params_from_json(j);
}

}  // namespace wair

#endif  // WAIR_ROBOT_HPP
