#ifndef WAIR_STATE_HPP
#define WAIR_STATE_HPP

#include <Eigen/Dense>

#include <array>

#include "wair/robot.hpp"
#include "wair/spatial.hpp"

namespace wair {

/// Generalized-coordinate layout of q_d = [p_B, Phi_B, (phi, gamma, l) x 4].
inline constexpr int kBodyDofs = 6;
inline constexpr int kLegJoints = 3;
inline constexpr int kDofs = kBodyDofs + kLegCount * kLegJoints;  // 18
inline constexpr int kStateDim = 2 * kDofs;                       // 36

constexpr int leg_column(Leg leg) { return kBodyDofs + kLegJoints * index(leg); }

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using GenVec = Eigen::Matrix<double, kDofs, 1>;
using StateVec = Eigen::Matrix<double, kStateDim, 1>;

/// Spherical-prismatic leg: hip sagittal sweep phi, hip frontal sweep gamma, length l.
struct LegState {
    double phi = 0.0;
    double gamma = 0.0;
    double length = 0.3;
    double phi_dot = 0.0;
    double gamma_dot = 0.0;
    double length_dot = 0.0;

    Vec3 joints() const { return {phi, gamma, length}; }
    Vec3 rates() const { return {phi_dot, gamma_dot, length_dot}; }
    void set_joints(const Vec3& q) { phi = q[0], gamma = q[1], length = q[2]; }
    void set_rates(const Vec3& v) { phi_dot = v[0], gamma_dot = v[1], length_dot = v[2]; }
};

struct HromState {
    Vec3 position = Vec3::Zero();
    EulerZYX euler{};
    Vec3 velocity = Vec3::Zero();
    Vec3 euler_rate = Vec3::Zero();
    std::array<LegState, kLegCount> legs{};

    LegState& leg(Leg l) { return legs[index(l)]; }
    const LegState& leg(Leg l) const { return legs[index(l)]; }

    Vec6 body_pose() const {
        Vec6 q;
        q << position, euler.as_vector();
        return q;
    }
    Vec6 body_twist() const {
        Vec6 v;
        v << velocity, euler_rate;
        return v;
    }
    void set_body_pose(const Vec6& q) {
        position = q.head<3>();
        euler = EulerZYX::from_vector(q.tail<3>());
    }
    void set_body_twist(const Vec6& v) {
        velocity = v.head<3>();
        euler_rate = v.tail<3>();
    }

    GenVec coordinates() const {
        GenVec q;
        q.head<kBodyDofs>() = body_pose();
        for (Leg l : kAllLegs) q.segment<3>(leg_column(l)) = leg(l).joints();
        return q;
    }
    GenVec velocities() const {
        GenVec v;
        v.head<kBodyDofs>() = body_twist();
        for (Leg l : kAllLegs) v.segment<3>(leg_column(l)) = leg(l).rates();
        return v;
    }

    /// x = [q_d; v_d].
    StateVec to_vector() const {
        StateVec x;
        x << coordinates(), velocities();
        return x;
    }

    static HromState from_vector(const StateVec& x) {
        HromState s;
        s.set_body_pose(x.segment<kBodyDofs>(0));
        s.set_body_twist(x.segment<kBodyDofs>(kDofs));
        for (Leg l : kAllLegs) {
            s.leg(l).set_joints(x.segment<3>(leg_column(l)));
            s.leg(l).set_rates(x.segment<3>(kDofs + leg_column(l)));
        }
        return s;
    }

    bool all_finite() const { return to_vector().allFinite(); }
};

enum class Frame { Body, World };

/// Thrust wrench acting at the COM: force f_t and moment m_t.
struct ThrustWrench {
    Vec3 force = Vec3::Zero();
    Vec3 moment = Vec3::Zero();
    Frame frame = Frame::Body;

    Vec6 as_vector() const {
        Vec6 u;
        u << force, moment;
        return u;
    }
    static ThrustWrench from_vector(const Vec6& u, Frame frame = Frame::Body) {
        return {u.head<3>(), u.tail<3>(), frame};
    }
};

/// Full control u = [u_e, u_L]: thrust wrench plus commanded leg joint accelerations.
struct ControlInput {
    ThrustWrench wrench{};
    Eigen::Matrix<double, kLegCount * kLegJoints, 1> leg_accel =
        Eigen::Matrix<double, kLegCount * kLegJoints, 1>::Zero();

    Vec3 leg(Leg l) const { return leg_accel.segment<3>(kLegJoints * index(l)); }
    void set_leg(Leg l, const Vec3& a) { leg_accel.segment<3>(kLegJoints * index(l)) = a; }
};

}  // namespace wair

#endif  // WAIR_STATE_HPP
