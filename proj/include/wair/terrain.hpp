#ifndef WAIR_TERRAIN_HPP
#define WAIR_TERRAIN_HPP

// Piecewise-planar ground, constant across y. Each segment starts at
// `start_x` and rises at `angle` (radians, positive uphill in +x). The first
// segment extends to -inf and the last to +inf.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wair/errors.hpp"
#include "wair/spatial.hpp"

namespace wair {

struct TerrainSegment {
    double start_x = 0.0;
    double angle = 0.0;
    double friction = 0.35;
};

class Terrain {
public:
    Terrain() : Terrain(std::vector<TerrainSegment>{TerrainSegment{}}) {}

    explicit Terrain(std::vector<TerrainSegment> segments, double origin_height = 0.0)
        : segments_(std::move(segments)), origin_height_(origin_height) {
        validate();
        build();
    }

    /// Flat ground followed by a constant slope starting at `junction_x`.
    static Terrain flat_then_slope(double junction_x, double angle, double friction) {
        return Terrain({{0.0, 0.0, friction}, {junction_x, angle, friction}});
    }

    const std::vector<TerrainSegment>& segments() const { return segments_; }
    double origin_height() const { return origin_height_; }

    std::size_t segment_index(double x) const {
        std::size_t i = 0;
        while (i + 1 < segments_.size() && x >= segments_[i + 1].start_x) ++i;
        return i;
    }
    const TerrainSegment& segment_at(double x) const { return segments_[segment_index(x)]; }

    double height(double x) const {
        const std::size_t i = segment_index(x);
        return start_height_[i] + (x - segments_[i].start_x) * std::tan(segments_[i].angle);
    }
    double angle(double x) const { return segment_at(x).angle; }
    double friction(double x) const { return segment_at(x).friction; }

    Vec3 surface_point(double x, double y = 0.0) const { return {x, y, height(x)}; }
    Vec3 normal(double x) const {
        const double a = angle(x);
        return {-std::sin(a), 0.0, std::cos(a)};
    }
    Vec3 tangent(double x) const {
        const double a = angle(x);
        return {std::cos(a), 0.0, std::sin(a)};
    }

    /// Signed distance along the surface from x = 0.
    double arc_length(double x) const {
        const std::size_t i = segment_index(x);
        return start_arc_[i] + (x - segments_[i].start_x) / std::cos(segments_[i].angle);
    }

    double x_at_arc(double s) const {
        std::size_t i = 0;
        while (i + 1 < segments_.size() && s >= start_arc_[i + 1]) ++i;
        return segments_[i].start_x + (s - start_arc_[i]) * std::cos(segments_[i].angle);
    }

    /// True when p lies on the surface within `tol` (vertical residual).
    bool on_surface(const Vec3& p, double tol = 1e-9) const { return std::abs(p.z() - height(p.x())) <= tol; }

    void validate() const {
        if (segments_.empty()) throw ConfigError("terrain.segments", "at least one segment required");
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& s = segments_[i];
            if (!std::isfinite(s.start_x) || !std::isfinite(s.angle))
                throw ConfigError("terrain.segments", "non-finite segment");
            if (std::abs(s.angle) >= 1.4) throw ConfigError("terrain.segments", "slope angle must be below 80 deg");
            if (!(s.friction > 0.0)) throw ConfigError("friction", "friction coefficient must be positive");
            if (i > 0 && !(s.start_x > segments_[i - 1].start_x))
                throw ConfigError("terrain.segments", "segment start_x must increase");
        }
    }

private:
    void build() {
        start_height_.assign(segments_.size(), origin_height_);
        start_arc_.assign(segments_.size(), 0.0);
        // Anchor height and arc length at x = 0, then accumulate both ways.
        const std::size_t k0 = segment_index(0.0);
        start_height_[k0] = origin_height_ - (0.0 - segments_[k0].start_x) * std::tan(segments_[k0].angle);
        start_arc_[k0] = -(0.0 - segments_[k0].start_x) / std::cos(segments_[k0].angle);
        for (std::size_t i = k0 + 1; i < segments_.size(); ++i) {
            const double dx = segments_[i].start_x - segments_[i - 1].start_x;
            start_height_[i] = start_height_[i - 1] + dx * std::tan(segments_[i - 1].angle);
            start_arc_[i] = start_arc_[i - 1] + dx / std::cos(segments_[i - 1].angle);
        }
        for (std::size_t i = k0; i-- > 0;) {
            const double dx = segments_[i + 1].start_x - segments_[i].start_x;
            start_height_[i] = start_height_[i + 1] - dx * std::tan(segments_[i].angle);
            start_arc_[i] = start_arc_[i + 1] - dx / std::cos(segments_[i].angle);
        }
    }

    std::vector<TerrainSegment> segments_;
    double origin_height_ = 0.0;
    std::vector<double> start_height_;
    std::vector<double> start_arc_;
};

inline nlohmann::json to_json(const Terrain& t) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : t.segments())
        segs.push_back({{"start_x", s.start_x}, {"angle_deg", s.angle * 180.0 / M_PI}, {"friction", s.friction}});
    return {{"segments", segs}, {"origin_height", t.origin_height()}};
}

inline Terrain terrain_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("segments") || !j["segments"].is_array())
        throw ConfigError("terrain.segments", "expected an array of segments");
    std::vector<TerrainSegment> segs;
    for (const auto& js : j["segments"]) {
        TerrainSegment s;
        if (!js.is_object()) throw ConfigError("terrain.segments", "expected objects");
        s.start_x = js.value("start_x", 0.0);
        if (js.contains("angle_deg"))
            s.angle = js["angle_deg"].get<double>() * M_PI / 180.0;
        else
            s.angle = js.value("angle", 0.0);
        s.friction = js.value("friction", 0.35);
        segs.push_back(s);
    }
    return Terrain(std::move(segs), j.value("origin_height", 0.0));
}

}  // namespace wair

#endif  // WAIR_TERRAIN_HPP
