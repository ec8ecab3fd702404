#ifndef WAIR_KINEMATICS_HPP
#define WAIR_KINEMATICS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "wair/robot.hpp"
#include "wair/spatial.hpp"
#include "wair/state.hpp"

namespace wair {

using FootJacobian = Eigen::Matrix<double, 3, kDofs>;
using BodyJacobian = Eigen::Matrix<double, 3, kBodyDofs>;

/// Hip-to-foot vector in the body frame: Ry(phi) Rx(gamma) (0, 0, -l).
inline Vec3 leg_vector(const Vec3& joints) {
    const double sp = std::sin(joints[0]), cp = std::cos(joints[0]);
    const double sg = std::sin(joints[1]), cg = std::cos(joints[1]);
    const double l = joints[2];
    return {-l * cg * sp, l * sg, -l * cg * cp};
}

/// d(leg_vector)/d(phi, gamma, l).
inline Mat3 leg_vector_jacobian(const Vec3& joints) {
    const double sp = std::sin(joints[0]), cp = std::cos(joints[0]);
    const double sg = std::sin(joints[1]), cg = std::cos(joints[1]);
    const double l = joints[2];
    Mat3 j;
    j << -l * cg * cp, l * sg * sp, -cg * sp,
         0.0, l * cg, sg,
         l * cg * sp, l * sg * cp, -cg * cp;
    return j;
}

/// Quadratic velocity term of the leg vector: sum_ab d2f/(dq_a dq_b) qdot_a qdot_b.
inline Vec3 leg_vector_bias(const Vec3& joints, const Vec3& rates) {
    const double sp = std::sin(joints[0]), cp = std::cos(joints[0]);
    const double sg = std::sin(joints[1]), cg = std::cos(joints[1]);
    const double l = joints[2];
    const double dp = rates[0], dg = rates[1], dl = rates[2];
    const double pp = dp * dp, gg = dg * dg;
    Vec3 b;
    b.x() = l * cg * sp * (pp + gg) + 2.0 * (l * sg * cp * dp * dg - cg * cp * dp * dl + sg * sp * dg * dl);
    b.y() = -l * sg * gg + 2.0 * cg * dg * dl;
    b.z() = l * cg * cp * (pp + gg) + 2.0 * (-l * sg * sp * dp * dg + cg * sp * dp * dl + sg * cp * dg * dl);
    return b;
}

/// Joint values (phi, gamma, l) that place the foot at body-frame offset `d` from the hip.
inline Vec3 leg_inverse_kinematics(const Vec3& d) {
    const double l = d.norm();
    const double gamma = l > 0.0 ? std::asin(std::clamp(d.y() / l, -1.0, 1.0)) : 0.0;
    const double phi = std::atan2(-d.x(), -d.z());
    return {phi, gamma, l};
}

inline Vec3 hip_position(const HromState& s, const RobotParams& p, Leg leg) {
    return s.position + euler_to_rotation(s.euler) * p.hip(leg);
}

/// p_f = p_B + R_B l_h + R_B l_f.
inline Vec3 foot_position(const HromState& s, const RobotParams& p, Leg leg) {
    const Rotation r = euler_to_rotation(s.euler);
    return s.position + r * (p.hip(leg) + leg_vector(s.leg(leg).joints()));
}

/// p_t = p_B + R_B l_t.
inline Vec3 thruster_position(const HromState& s, const RobotParams& p, Leg unit) {
    return s.position + euler_to_rotation(s.euler) * p.thruster_offsets[index(unit)];
}

/// Body-frame COM-to-foot lever arm.
inline Vec3 foot_lever_arm(const HromState& s, const RobotParams& p, Leg leg) {
    return p.hip(leg) + leg_vector(s.leg(leg).joints());
}

/// Columns of the foot Jacobian for the body coordinates (p_B, Phi_B), given the
/// body-frame lever arm from the COM to the foot.
inline BodyJacobian body_point_jacobian(const EulerZYX& e, const Vec3& lever_arm) {
    BodyJacobian j;
    j.leftCols<3>().setIdentity();
    j.rightCols<3>() = -euler_to_rotation(e) * skew(lever_arm) * euler_rate_matrix(e);
    return j;
}

/// J_i = d(p_f_dot)/d(v_d), 3 x 18. Only body columns and the leg's own joint columns are nonzero.
inline FootJacobian foot_jacobian(const HromState& s, const RobotParams& p, Leg leg) {
    FootJacobian j = FootJacobian::Zero();
    j.leftCols<kBodyDofs>() = body_point_jacobian(s.euler, foot_lever_arm(s, p, leg));
    j.middleCols<kLegJoints>(leg_column(leg)) =
        euler_to_rotation(s.euler) * leg_vector_jacobian(s.leg(leg).joints());
    return j;
}

/// Foot acceleration at zero generalized acceleration (the J_dot * v term).
inline Vec3 foot_jdot_v(const HromState& s, const RobotParams& p, Leg leg) {
    const Rotation r = euler_to_rotation(s.euler);
    const Mat3 e = euler_rate_matrix(s.euler);
    const Vec3 omega = e * s.euler_rate;
    const Vec3 omega_dot = euler_rate_matrix_dot(s.euler, s.euler_rate) * s.euler_rate;
    const LegState& l = s.leg(leg);
    const Vec3 arm = p.hip(leg) + leg_vector(l.joints());
    const Vec3 arm_dot = leg_vector_jacobian(l.joints()) * l.rates();
    const Vec3 arm_ddot = leg_vector_bias(l.joints(), l.rates());
    return r * (omega.cross(omega.cross(arm)) + omega_dot.cross(arm) + 2.0 * omega.cross(arm_dot) + arm_ddot);
}

inline Vec3 foot_velocity(const HromState& s, const RobotParams& p, Leg leg) {
    return foot_jacobian(s, p, leg) * s.velocities();
}

}  // namespace wair

#endif  // WAIR_KINEMATICS_HPP
