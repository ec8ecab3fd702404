#ifndef WAIR_BODY_MODEL_HPP
#define WAIR_BODY_MODEL_HPP

// Torso-only view of the model used by the optimizer and by the episode
// integrator. Stance legs act as a drive: their joint accelerations are chosen
// so the feet stay on their anchors while the body follows a commanded
// acceleration a_cmd (reference feed-forward plus PD on the reference). With
// that choice the contact right-hand side is J_b a_cmd, and the multipliers
// depend only on (body state, thrust, time).

#include <vector>

#include "wair/dynamics.hpp"
#include "wair/gait.hpp"

namespace wair {

inline constexpr int kBodyStateDim = 12;
using BodyStateVec = Eigen::Matrix<double, kBodyStateDim, 1>;

struct TrackingGains {
    double kp = 100.0;
    double kd = 20.0;
};

/// Commanded body acceleration; inactive coordinates get zero.
inline Vec6 tracking_accel(const BodyReference& ref, const Vec6& pose, const Vec6& twist, const TrackingGains& k,
                           const ModelOptions& opt) {
    Vec6 a = ref.accel + k.kp * (ref.pose - pose) + k.kd * (ref.rate - twist);
    if (opt.sagittal) {
        for (int i : {1, 3, 5}) a[i] = 0.0;
    }
    return a;
}

struct BodyStance {
    Leg leg;
    Vec3 anchor;
    Vec3 normal;
};

inline std::vector<BodyStance> body_stance(const ContactSet& c) {
    std::vector<BodyStance> out;
    for (Leg l : c.stance_legs()) out.push_back({l, c.anchor(l), c.normal(l)});
    return out;
}

/// Body accelerations and multipliers with feet pinned at their anchors.
inline BodySolution body_dynamics(const BodyStateVec& x, const RobotParams& p, const std::vector<BodyStance>& stance,
                                  const ThrustWrench& u, const Vec6& a_cmd, const ModelOptions& opt) {
    const EulerZYX e = EulerZYX::from_vector(x.segment<3>(3));
    const Rotation r = euler_to_rotation(e);
    const Vec3 pos = x.head<3>();
    std::vector<BodyContact> contacts;
    contacts.reserve(stance.size());
    for (const BodyStance& s : stance) {
        const Vec3 arm = r.transpose() * (s.anchor - pos);
        contacts.push_back({s.leg, arm, body_point_jacobian(e, arm) * a_cmd});
    }
    return solve_body_contact(e, x.segment<3>(9), p, contacts, u, opt);
}

inline BodyStateVec body_state(const HromState& s) {
    BodyStateVec x;
    x << s.body_pose(), s.body_twist();
    return x;
}

inline BodyStateVec body_state(const BodyReference& r) {
    BodyStateVec x;
    x << r.pose, r.rate;
    return x;
}

}  // namespace wair

#endif  // WAIR_BODY_MODEL_HPP
