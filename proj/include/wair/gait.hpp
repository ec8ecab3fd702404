#ifndef WAIR_GAIT_HPP
#define WAIR_GAIT_HPP

// Reference body path, diagonal two-point gait clock, foothold lattice and
// velocity-lookahead foothold selection, and quintic Bezier swing curves.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "wair/errors.hpp"
#include "wair/robot.hpp"
#include "wair/spatial.hpp"
#include "wair/state.hpp"
#include "wair/terrain.hpp"

namespace wair {

// ---------------------------------------------------------------------------
// Reference trajectory
// ---------------------------------------------------------------------------

/// Quintic smootherstep on [0, 1] and its first two derivatives.
struct Blend {
    double value, d1, d2;
};

inline Blend smootherstep(double u) {
    if (u <= 0.0) return {0.0, 0.0, 0.0};
    if (u >= 1.0) return {1.0, 0.0, 0.0};
    const double u2 = u * u, u3 = u2 * u;
    return {u3 * (10.0 - 15.0 * u + 6.0 * u2), 30.0 * u2 * (1.0 - u) * (1.0 - u), 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)};
}

/// Body pose, rate and acceleration in generalized body coordinates (p, yaw, pitch, roll).
struct BodyReference {
    Vec6 pose = Vec6::Zero();
    Vec6 rate = Vec6::Zero();
    Vec6 accel = Vec6::Zero();

    double pitch() const { return pose[4]; }
};

struct ReferenceOptions {
    double speed = 0.375;        // m/s along the path
    double body_height = 0.32;   // COM offset along the surface normal [m]
    double blend_window = 0.3;   // s, centred on each slope junction
    double start_x = 0.0;
    double lateral_y = 0.0;
};

/// COM path offset from the terrain along its normal, travelled at constant
/// speed, with pitch parallel to the local slope. Around each junction the two
/// straight offset lines are mixed by a smootherstep, which keeps position and
/// pitch twice differentiable. Euler pitch is the negated slope angle (nose up
/// when climbing toward +x).
class ReferenceTrajectory {
public:
    ReferenceTrajectory(const Terrain& terrain, ReferenceOptions opt) : opt_(opt) {
        if (!(opt.speed > 0.0)) throw ConfigError("speed", "must be positive");
        if (!(opt.body_height > 0.0)) throw ConfigError("body_height", "must be positive");
        if (!(opt.blend_window >= 0.0)) throw ConfigError("blend_window", "must be non-negative");
        const auto& segs = terrain.segments();
        const std::size_t first = terrain.segment_index(opt.start_x);
        const Eigen::Vector2d start(opt.start_x, terrain.height(opt.start_x));
        const double a0 = segs[first].angle;
        Eigen::Vector2d p = start + opt.body_height * Eigen::Vector2d(-std::sin(a0), std::cos(a0));
        legs_.push_back({p, a0, 0.0});
        for (std::size_t i = first + 1; i < segs.size(); ++i) {
            const Eigen::Vector2d j(segs[i].start_x, terrain.height(segs[i].start_x));
            const double a1 = segs[i - 1].angle, a2 = segs[i].angle;
            const Eigen::Vector2d n1(-std::sin(a1), std::cos(a1)), n2(-std::sin(a2), std::cos(a2));
            const Eigen::Vector2d d1(std::cos(a1), std::sin(a1)), d2(std::cos(a2), std::sin(a2));
            // j + H n1 + r d1 = j + H n2 + s d2
            Eigen::Matrix2d m;
            m << d1, -d2;
            const Eigen::Vector2d rs = m.partialPivLu().solve(opt.body_height * (n2 - n1));
            const Eigen::Vector2d vertex = j + opt.body_height * n1 + rs[0] * d1;
            const double arc = legs_.back().arc + (vertex - legs_.back().origin).norm();
            if (arc <= legs_.back().arc) throw ConfigError("terrain.segments", "junction behind the start of the path");
            legs_.push_back({vertex, a2, arc});
        }
        const double half = 0.5 * opt.speed * opt.blend_window;
        for (std::size_t k = 1; k + 1 < legs_.size(); ++k) {
            if (legs_[k + 1].arc - legs_[k].arc < 2.0 * half)
                throw ConfigError("blend_window", "blend windows of neighbouring junctions overlap");
        }
    }

    const ReferenceOptions& options() const { return opt_; }

    /// Slope angle of the path direction at time t (equals minus the Euler pitch).
    double path_angle(double t) const { return -at(t).pitch(); }

    /// Time at which the path reaches junction vertex k (k >= 1).
    double vertex_time(std::size_t k) const { return legs_.at(k).arc / opt_.speed; }
    std::size_t vertex_count() const { return legs_.size() - 1; }

    BodyReference at(double t) const {
        const double v = opt_.speed;
        const double sigma = v * t;
        const double half = 0.5 * v * opt_.blend_window;
        std::size_t k = 0;
        while (k + 1 < legs_.size() && sigma >= legs_[k + 1].arc) ++k;

        Eigen::Vector2d pos, d1v, d2v;
        double ang, dang, ddang;
        // Blend with the nearest junction if inside its window.
        std::size_t vtx = 0;
        if (k + 1 < legs_.size() && legs_[k + 1].arc - sigma < half) vtx = k + 1;
        if (k >= 1 && sigma - legs_[k].arc < half) vtx = k;
        if (vtx > 0 && half > 0.0) {
            const Leg2& a = legs_[vtx - 1];
            const Leg2& b = legs_[vtx];
            const double r = sigma - b.arc;
            const Blend w = smootherstep((r + half) / (2.0 * half));
            const double w1 = w.d1 / (2.0 * half), w2 = w.d2 / (4.0 * half * half);
            const Eigen::Vector2d da = a.dir(), db = b.dir();
            const Eigen::Vector2d la = b.origin + r * da, lb = b.origin + r * db;
            pos = (1.0 - w.value) * la + w.value * lb;
            d1v = (1.0 - w.value) * da + w.value * db + w1 * (lb - la);
            d2v = 2.0 * w1 * (db - da) + w2 * (lb - la);
            ang = (1.0 - w.value) * a.angle + w.value * b.angle;
            dang = w1 * (b.angle - a.angle);
            ddang = w2 * (b.angle - a.angle);
        } else {
            const Leg2& a = legs_[k];
            pos = a.origin + (sigma - a.arc) * a.dir();
            d1v = a.dir();
            d2v.setZero();
            ang = a.angle;
            dang = ddang = 0.0;
        }
        BodyReference ref;
        ref.pose << pos.x(), opt_.lateral_y, pos.y(), 0.0, -ang, 0.0;
        ref.rate << v * d1v.x(), 0.0, v * d1v.y(), 0.0, -v * dang, 0.0;
        ref.accel << v * v * d2v.x(), 0.0, v * v * d2v.y(), 0.0, -v * v * ddang, 0.0;
        return ref;
    }

private:
    struct Leg2 {
        Eigen::Vector2d origin;  // start of this straight piece (a junction vertex or the path start)
        double angle;
        double arc;              // path arc length at `origin`
        Eigen::Vector2d dir() const { return {std::cos(angle), std::sin(angle)}; }
    };
    ReferenceOptions opt_;
    std::vector<Leg2> legs_;
};

/// Reference pose expressed as an HromState body block (legs untouched).
inline void apply_reference(HromState& s, const BodyReference& r) {
    s.set_body_pose(r.pose);
    s.set_body_twist(r.rate);
}

// ---------------------------------------------------------------------------
// Gait schedule
// ---------------------------------------------------------------------------

struct GaitPhase {
    int index = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::array<bool, kLegCount> stance{};

    double duration() const { return t_end - t_start; }
    bool in_stance(Leg l) const { return stance[wair::index(l)]; }
    std::vector<Leg> stance_legs() const {
        std::vector<Leg> out;
        for (Leg l : kAllLegs)
            if (in_stance(l)) out.push_back(l);
        return out;
    }
    std::vector<Leg> swing_legs() const {
        std::vector<Leg> out;
        for (Leg l : kAllLegs)
            if (!in_stance(l)) out.push_back(l);
        return out;
    }
};

/// Alternating diagonal pairs: even phases FR+HL, odd phases FL+HR.
class GaitSchedule {
public:
    GaitSchedule(double period, double t_final) : period_(period) {
        if (!(period > 0.0)) throw ConfigError("gait.period", "must be positive");
        const double count = std::round(t_final / period);
        if (count < 1.0 || std::abs(count * period - t_final) > 1e-9)
            throw ConfigError("gait.period", "phases must tile the episode exactly");
        for (int k = 0; k < static_cast<int>(count); ++k) {
            GaitPhase p;
            p.index = k;
            p.t_start = k * period;
            p.t_end = (k + 1) * period;
            const bool even = k % 2 == 0;
            p.stance[index(Leg::FR)] = p.stance[index(Leg::HL)] = even;
            p.stance[index(Leg::FL)] = p.stance[index(Leg::HR)] = !even;
            phases_.push_back(p);
        }
    }

    double period() const { return period_; }
    double t_final() const { return phases_.back().t_end; }
    const std::vector<GaitPhase>& phases() const { return phases_; }
    const GaitPhase& phase(std::size_t k) const { return phases_.at(k); }

    /// Phase containing t; a boundary time belongs to the phase that starts there.
    std::size_t phase_index(double t) const {
        const double k = std::floor(t / period_ + 1e-9);
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(phases_.size() - 1)));
    }
    const GaitPhase& phase_at(double t) const { return phases_[phase_index(t)]; }

private:
    double period_;
    std::vector<GaitPhase> phases_;
};

// ---------------------------------------------------------------------------
// Foothold lattice and selection
// ---------------------------------------------------------------------------

/// Predefined footholds: points every `spacing` metres of surface arc length on
/// lines of constant y. Index order is line by line (ascending y), then by arc.
struct FootholdLattice {
    double spacing = 0.1;
    std::vector<double> lateral;
    long first_k = 0;
    long count_per_line = 0;
    std::vector<Vec3> points;

    int index_of(std::size_t line, long k) const {
        return static_cast<int>(line * count_per_line + (k - first_k));
    }
};

inline FootholdLattice make_lattice(const Terrain& terrain, double spacing, std::vector<double> lateral, double arc_min,
                                    double arc_max) {
    if (!(spacing > 0.0)) throw ConfigError("gait.lattice_spacing", "must be positive");
    std::sort(lateral.begin(), lateral.end());
    lateral.erase(std::unique(lateral.begin(), lateral.end()), lateral.end());
    FootholdLattice lat;
    lat.spacing = spacing;
    lat.lateral = lateral;
    lat.first_k = static_cast<long>(std::floor(arc_min / spacing));
    const long last_k = static_cast<long>(std::ceil(arc_max / spacing));
    lat.count_per_line = last_k - lat.first_k + 1;
    for (double y : lateral) {
        for (long k = lat.first_k; k <= last_k; ++k) lat.points.push_back(terrain.surface_point(terrain.x_at_arc(k * spacing), y));
    }
    return lat;
}

/// Closest point of the terrain profile to p in the x-z plane (y kept).
inline Vec3 project_to_terrain(const Terrain& terrain, const Vec3& p) {
    const auto& segs = terrain.segments();
    Vec3 best = terrain.surface_point(p.x(), p.y());
    double best_d = (best - p).squaredNorm();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const double lo = i == 0 ? -std::numeric_limits<double>::infinity() : segs[i].start_x;
        const double hi = i + 1 == segs.size() ? std::numeric_limits<double>::infinity() : segs[i + 1].start_x;
        const double a = segs[i].angle;
        const double x_ref = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
        const Vec3 o = terrain.surface_point(x_ref, p.y());
        const Vec3 d(std::cos(a), 0.0, std::sin(a));
        double x = (o + (p - o).dot(d) * d).x();
        x = std::clamp(x, lo, std::nextafter(hi, -std::numeric_limits<double>::infinity()));
        const Vec3 q = terrain.surface_point(x, p.y());
        const double dist = (q - p).squaredNorm();
        if (dist < best_d) best_d = dist, best = q;
    }
    return best;
}

struct GaitOptions {
    double period = 0.5;
    double clearance = 0.05;
    double lattice_spacing = 0.1;
    /// Lookahead as a fraction of the stance duration (v * T * fraction).
    double lookahead = 0.5;
};

/// Hip position of `leg` when the body sits on the reference at time t.
inline Vec3 reference_hip(const ReferenceTrajectory& ref, const RobotParams& p, Leg leg, double t) {
    const BodyReference r = ref.at(t);
    return r.pose.head<3>() + euler_to_rotation(EulerZYX::from_vector(r.pose.tail<3>())) * p.hip(leg);
}

/// Lookahead target of the velocity heuristic: ground projection of the hip
/// plus v_body * T * fraction.
inline Vec3 foothold_target(const Terrain& terrain, const ReferenceTrajectory& ref, const RobotParams& p, Leg leg,
                            double t, double stance_duration, double fraction) {
    const Vec3 v = ref.at(t).rate.head<3>();
    return project_to_terrain(terrain, reference_hip(ref, p, leg, t)) + v * stance_duration * fraction;
}

/// Strict ordering used for nearest-point selection: distance, then further
/// along the heading, then lower lattice index.
inline bool closer_candidate(double d_a, double h_a, int i_a, double d_b, double h_b, int i_b) {
    constexpr double tie = 1e-12;
    if (std::abs(d_a - d_b) > tie) return d_a < d_b;
    if (std::abs(h_a - h_b) > tie) return h_a > h_b;
    return i_a < i_b;
}

/// Nearest lattice point to `target` using the arc-length structure of the lattice.
inline int nearest_lattice_point(const Terrain& terrain, const FootholdLattice& lat, const Vec3& target,
                                 const Vec3& heading) {
    const double s = terrain.arc_length(project_to_terrain(terrain, target).x());
    const long k_mid = static_cast<long>(std::llround(s / lat.spacing));
    int best = -1;
    double best_d = 0.0, best_h = 0.0;
    for (std::size_t line = 0; line < lat.lateral.size(); ++line) {
        for (long k = k_mid - 2; k <= k_mid + 2; ++k) {
            if (k < lat.first_k || k >= lat.first_k + lat.count_per_line) continue;
            const int i = lat.index_of(line, k);
            const double d = (lat.points[i] - target).norm();
            const double h = lat.points[i].dot(heading);
            if (best < 0 || closer_candidate(d, h, i, best_d, best_h, best)) best = i, best_d = d, best_h = h;
        }
    }
    if (best < 0) throw NoReachableFoothold("lookahead target lies outside the foothold lattice");
    return best;
}

struct PhaseFootholds {
    /// Foot position at phase start and end; equal for stance legs.
    std::array<Vec3, kLegCount> start{};
    std::array<Vec3, kLegCount> end{};
    /// Lattice index of the stance anchor, or of the swing target.
    std::array<int, kLegCount> lattice_index{};
    std::array<Vec3, kLegCount> normal{};
};

struct FootholdPlan {
    std::vector<PhaseFootholds> phases;
    /// Per-leg ordered anchors (initial placement followed by each touchdown).
    std::array<std::vector<Vec3>, kLegCount> anchors;
    std::array<std::vector<int>, kLegCount> indices;
};

namespace detail {

inline bool reachable(const ReferenceTrajectory& ref, const RobotParams& p, Leg leg, const Vec3& anchor, double t0,
                      double t1) {
    for (int k = 0; k <= 4; ++k) {
        const double t = t0 + (t1 - t0) * k / 4.0;
        const double l = (anchor - reference_hip(ref, p, leg, t)).norm();
        if (l < p.leg_length_min || l > p.leg_length_max) return false;
    }
    return true;
}

inline int choose_foothold(const Terrain& terrain, const FootholdLattice& lat, const ReferenceTrajectory& ref,
                           const RobotParams& p, Leg leg, double t_td, double t_lo, const GaitOptions& g) {
    const Vec3 target = foothold_target(terrain, ref, p, leg, t_td, g.period, g.lookahead);
    Vec3 heading = ref.at(t_td).rate.head<3>();
    heading = heading.norm() > 1e-12 ? heading.normalized() : Vec3::UnitX();
    const int nearest = nearest_lattice_point(terrain, lat, target, heading);
    if (reachable(ref, p, leg, lat.points[nearest], t_td, t_lo)) return nearest;
    // Fall back to the closest reachable point in the same order.
    std::vector<int> order(lat.points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return closer_candidate((lat.points[a] - target).norm(), lat.points[a].dot(heading), a,
                                (lat.points[b] - target).norm(), lat.points[b].dot(heading), b);
    });
    for (int i : order)
        if (reachable(ref, p, leg, lat.points[i], t_td, t_lo)) return i;
    std::ostringstream os;
    os << "no lattice point within leg reach for " << name(leg) << " at t = " << t_td;
    throw NoReachableFoothold(os.str());
}

}  // namespace detail

/// Anchors for every stance phase from the half-phase velocity lookahead.
/// Legs swinging in the first phase start on the lattice point nearest their hip.
inline FootholdPlan select_footholds(const Terrain& terrain, const FootholdLattice& lat,
                                     const ReferenceTrajectory& ref, const GaitSchedule& gait, const RobotParams& p,
                                     const GaitOptions& g) {
    const std::size_t n = gait.phases().size();
    const double period = gait.period();
    FootholdPlan plan;
    plan.phases.resize(n);

    // anchor_for[k][leg]: lattice index of the anchor used while `leg` stands in phase k.
    // Index n serves legs that swing in the final phase.
    std::vector<std::array<int, kLegCount>> anchor_for(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const bool even = k % 2 == 0;
        for (Leg leg : kAllLegs) {
            const bool stance = (leg == Leg::FR || leg == Leg::HL) == even;
            anchor_for[k][index(leg)] = -1;
            if (!stance) continue;
            const double t_td = k * period;
            anchor_for[k][index(leg)] = detail::choose_foothold(terrain, lat, ref, p, leg, t_td, t_td + period, g);
        }
    }
    std::array<int, kLegCount> initial{};
    for (Leg leg : kAllLegs) {
        if (anchor_for[0][index(leg)] >= 0) {
            initial[index(leg)] = anchor_for[0][index(leg)];
        } else {
            const Vec3 below = project_to_terrain(terrain, reference_hip(ref, p, leg, 0.0));
            initial[index(leg)] = nearest_lattice_point(terrain, lat, below, Vec3::UnitX());
        }
        plan.anchors[index(leg)].push_back(lat.points[initial[index(leg)]]);
        plan.indices[index(leg)].push_back(initial[index(leg)]);
    }

    std::array<int, kLegCount> current = initial;
    for (std::size_t k = 0; k < n; ++k) {
        const GaitPhase& ph = gait.phase(k);
        auto& pf = plan.phases[k];
        for (Leg leg : kAllLegs) {
            const int li = index(leg);
            if (ph.in_stance(leg)) {
                current[li] = anchor_for[k][li];
                pf.start[li] = pf.end[li] = lat.points[current[li]];
                pf.lattice_index[li] = current[li];
            } else {
                const int next = anchor_for[k + 1][li];
                pf.start[li] = lat.points[current[li]];
                pf.end[li] = lat.points[next];
                pf.lattice_index[li] = next;
                plan.anchors[li].push_back(lat.points[next]);
                plan.indices[li].push_back(next);
                current[li] = next;
            }
            pf.normal[li] = terrain.normal(pf.end[li].x());
        }
    }
    return plan;
}

inline nlohmann::json to_json(const FootholdPlan& plan) {
    nlohmann::json j;
    nlohmann::json phases = nlohmann::json::array();
    for (std::size_t k = 0; k < plan.phases.size(); ++k) {
        nlohmann::json jp;
        jp["phase"] = k;
        for (Leg leg : kAllLegs) {
            const int li = index(leg);
            jp["legs"][std::string(name(leg))] = {{"start", detail::vec3_to_json(plan.phases[k].start[li])},
                                                  {"end", detail::vec3_to_json(plan.phases[k].end[li])},
                                                  {"lattice_index", plan.phases[k].lattice_index[li]}};
        }
        phases.push_back(jp);
    }
    j["phases"] = phases;
    for (Leg leg : kAllLegs) {
        nlohmann::json a = nlohmann::json::array();
        for (const Vec3& v : plan.anchors[index(leg)]) a.push_back(detail::vec3_to_json(v));
        j["anchors"][std::string(name(leg))] = a;
        j["indices"][std::string(name(leg))] = plan.indices[index(leg)];
    }
    return j;
}

// ---------------------------------------------------------------------------
// Swing curves
// ---------------------------------------------------------------------------

/// Quintic Bezier swing path. P0 = P1 = from and P4 = P5 = to give zero
/// velocity at both ends; P2 and P3 are lifted along the mean surface normal so
/// that a symmetric step peaks at exactly `clearance` at s = 0.5.
struct SwingCurve {
    std::array<Vec3, 6> control{};
    Vec3 from = Vec3::Zero();
    Vec3 to = Vec3::Zero();
    double clearance = 0.0;
    double duration = 1.0;

    /// Point at normalized parameter s in [0, 1] (de Casteljau).
    Vec3 at(double s) const {
        std::array<Vec3, 6> b = control;
        for (int r = 1; r < 6; ++r)
            for (int i = 0; i < 6 - r; ++i) b[i] = (1.0 - s) * b[i] + s * b[i + 1];
        return b[0];
    }
    /// d/ds.
    Vec3 derivative(double s) const {
        std::array<Vec3, 5> b;
        for (int i = 0; i < 5; ++i) b[i] = 5.0 * (control[i + 1] - control[i]);
        for (int r = 1; r < 5; ++r)
            for (int i = 0; i < 5 - r; ++i) b[i] = (1.0 - s) * b[i] + s * b[i + 1];
        return b[0];
    }
    /// Position and time derivative at time tau since lift-off.
    Vec3 position_at_time(double tau) const { return at(std::clamp(tau / duration, 0.0, 1.0)); }
    Vec3 velocity_at_time(double tau) const {
        if (tau <= 0.0 || tau >= duration) return Vec3::Zero();
        return derivative(tau / duration) / duration;
    }
};

inline constexpr double kSwingLift = 1.6;  // 1 / (B_2(0.5) + B_3(0.5)) for the quintic basis

inline SwingCurve swing_trajectory(const Vec3& from, const Vec3& to, double clearance, double duration,
                                   const Vec3& normal = Vec3::UnitZ()) {
    if (!(clearance > 0.0)) throw ConfigError("gait.clearance", "must be positive");
    if (!(duration > 0.0)) throw ConfigError("gait.period", "swing duration must be positive");
    SwingCurve c;
    c.from = from;
    c.to = to;
    c.clearance = clearance;
    c.duration = duration;
    const bool degenerate = (to - from).norm() < 1e-12;
    const Vec3 lift = degenerate ? Vec3::Zero() : (kSwingLift * clearance * normal.normalized()).eval();
    c.control = {from, from, from + lift, to + lift, to, to};
    return c;
}

}  // namespace wair

#endif  // WAIR_GAIT_HPP
