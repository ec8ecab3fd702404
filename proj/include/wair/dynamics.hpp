#ifndef WAIR_DYNAMICS_HPP
#define WAIR_DYNAMICS_HPP

// Equations of motion of the reduced-order model.
//
// The torso is the only body with inertia. Legs are massless kinematic chains:
// swing-leg joints follow commanded accelerations, stance-leg joints are
// recovered from the no-slip contact constraint. The contact multipliers are
// found from the Schur complement of the KKT system
//
//     [ M  -J^T ] [ v_dot  ]   [ Q(u_e) - h ]
//     [ J   0   ] [ lambda ] = [ rhs        ]
//
// restricted to the 6-D body block. Two point contacts leave one internal
// (squeeze) force along the foot-to-foot line undetermined; the pseudo-inverse
// picks the multiplier with no internal component.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "wair/errors.hpp"
#include "wair/kinematics.hpp"
#include "wair/robot.hpp"
#include "wair/spatial.hpp"
#include "wair/state.hpp"

namespace wair {

using GenMat = Eigen::Matrix<double, kDofs, kDofs>;

struct ModelOptions {
    /// Freeze lateral position, roll, yaw and the gamma joints.
    bool sagittal = false;
    /// Baumgarte rate applied to stance-leg joint accelerations; 0 disables.
    double baumgarte_alpha = 20.0;
    /// Maximum foot-to-anchor distance accepted for a stance foot [m].
    double anchor_tolerance = 1e-6;
};

/// Active body coordinates (indices into (p_B, Phi_B)) and active contact force rows.
struct ActiveSet {
    std::vector<int> body;
    std::vector<int> rows;

    static ActiveSet for_model(const ModelOptions& opt) {
        if (opt.sagittal) return {{0, 2, 4}, {0, 2}};
        return {{0, 1, 2, 3, 4, 5}, {0, 1, 2}};
    }
};

struct ContactSet {
    std::array<bool, kLegCount> stance{};
    std::array<Vec3, kLegCount> anchors{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    /// Terrain normal under each stance foot (the two feet may sit on different planes).
    std::array<Vec3, kLegCount> normals{Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ()};
    double friction = 0.35;

    void set_stance(Leg leg, const Vec3& anchor, const Vec3& normal = Vec3::UnitZ()) {
        stance[index(leg)] = true;
        anchors[index(leg)] = anchor;
        normals[index(leg)] = normal.normalized();
    }
    bool in_stance(Leg leg) const { return stance[index(leg)]; }
    const Vec3& anchor(Leg leg) const { return anchors[index(leg)]; }
    const Vec3& normal(Leg leg) const { return normals[index(leg)]; }

    std::vector<Leg> stance_legs() const {
        std::vector<Leg> out;
        for (Leg l : kAllLegs)
            if (in_stance(l)) out.push_back(l);
        return out;
    }
    int stance_count() const { return static_cast<int>(std::count(stance.begin(), stance.end(), true)); }

    void validate() const {
        if (!(friction > 0.0)) throw ConfigError("friction", "friction coefficient must be positive");
        for (Leg l : stance_legs()) {
            if (std::abs(normal(l).norm() - 1.0) > 1e-9)
                throw ConfigError("normal", "surface normal must be unit length");
        }
    }
};

/// Contact multipliers (world frame) and their generalized wrench on the body.
struct GroundReaction {
    std::vector<Leg> legs;
    std::vector<Vec3> forces;
    Vec6 wrench = Vec6::Zero();

    std::optional<Vec3> force(Leg leg) const {
        for (std::size_t i = 0; i < legs.size(); ++i)
            if (legs[i] == leg) return forces[i];
        return std::nullopt;
    }
    Vec3 total_force() const {
        Vec3 f = Vec3::Zero();
        for (const Vec3& l : forces) f += l;
        return f;
    }
};

// ---------------------------------------------------------------------------
// Energies and the body block of M, h.
// ---------------------------------------------------------------------------

inline Vec3 body_angular_velocity(const HromState& s) { return euler_rate_matrix(s.euler) * s.euler_rate; }

inline double kinetic_energy(const HromState& s, const RobotParams& p) {
    const Vec3 w = body_angular_velocity(s);
    return 0.5 * p.body_mass * s.velocity.squaredNorm() + 0.5 * w.dot(p.body_inertia * w);
}

inline double potential_energy(const HromState& s, const RobotParams& p) {
    return -p.body_mass * s.position.dot(p.gravity);
}

inline double total_energy(const HromState& s, const RobotParams& p) {
    return kinetic_energy(s, p) + potential_energy(s, p);
}

inline Mat6 body_mass_matrix(const EulerZYX& e, const RobotParams& p) {
    const Mat3 E = euler_rate_matrix(e);
    Mat6 m = Mat6::Zero();
    m.topLeftCorner<3, 3>() = p.body_mass * Mat3::Identity();
    m.bottomRightCorner<3, 3>() = E.transpose() * p.body_inertia * E;
    return m;
}

inline Vec6 body_bias(const EulerZYX& e, const Vec3& euler_rate, const RobotParams& p) {
    const Mat3 E = euler_rate_matrix(e);
    const Vec3 w = E * euler_rate;
    const Vec3 gyro = p.body_inertia * (euler_rate_matrix_dot(e, euler_rate) * euler_rate) + w.cross(p.body_inertia * w);
    Vec6 h;
    h << -p.body_mass * p.gravity, E.transpose() * gyro;
    return h;
}

/// Full 18 x 18 mass matrix. Leg rows and columns are zero (massless legs).
inline GenMat mass_matrix(const HromState& s, const RobotParams& p) {
    GenMat m = GenMat::Zero();
    m.topLeftCorner<kBodyDofs, kBodyDofs>() = body_mass_matrix(s.euler, p);
    return m;
}

/// Coriolis, centrifugal and gravity terms h. Leg entries are zero.
inline GenVec bias_vector(const HromState& s, const RobotParams& p) {
    GenVec h = GenVec::Zero();
    h.head<kBodyDofs>() = body_bias(s.euler, s.euler_rate, p);
    return h;
}

/// Generalized force of a thrust wrench applied at the COM.
inline Vec6 wrench_generalized_force(const EulerZYX& e, const ThrustWrench& u) {
    const Rotation r = euler_to_rotation(e);
    const Mat3 E = euler_rate_matrix(e);
    Vec6 q;
    if (u.frame == Frame::Body) {
        q << r * u.force, E.transpose() * u.moment;
    } else {
        q << u.force, E.transpose() * (r.transpose() * u.moment);
    }
    return q;
}

// ---------------------------------------------------------------------------
// Contact solve on the body block.
// ---------------------------------------------------------------------------

/// One stance contact seen from the body: lever arm from COM to foot (body
/// frame) and the foot acceleration the body must produce, J_b v_dot = rhs.
struct BodyContact {
    Leg leg;
    Vec3 lever_arm;
    Vec3 rhs;
};

struct BodySolution {
    Vec6 accel = Vec6::Zero();
    GroundReaction grf;
    /// ||J_b v_dot - rhs||_inf on the active rows.
    double kkt_residual = 0.0;
};

namespace detail {

inline int expected_contact_rank(int contacts, bool sagittal) {
    if (sagittal) return contacts == 0 ? 0 : (contacts == 1 ? 2 : 3);
    static constexpr std::array<int, 4> rank{0, 3, 5, 6};
    return rank[std::min(contacts, 3)];
}

}  // namespace detail

inline BodySolution solve_body_contact(const EulerZYX& e, const Vec3& euler_rate, const RobotParams& p,
                                       const std::vector<BodyContact>& contacts, const ThrustWrench& u,
                                       const ModelOptions& opt) {
    const ActiveSet act = ActiveSet::for_model(opt);
    const int nb = static_cast<int>(act.body.size());
    const int nr = static_cast<int>(act.rows.size());
    const int nc = static_cast<int>(contacts.size());

    const Mat6 m_full = body_mass_matrix(e, p);
    const Vec6 force = wrench_generalized_force(e, u) - body_bias(e, euler_rate, p);

    Eigen::MatrixXd m(nb, nb);
    Eigen::VectorXd f(nb);
    for (int i = 0; i < nb; ++i) {
        f[i] = force[act.body[i]];
        for (int k = 0; k < nb; ++k) m(i, k) = m_full(act.body[i], act.body[k]);
    }
    const Eigen::LLT<Eigen::MatrixXd> m_llt(m);
    const Eigen::VectorXd accel_free = m_llt.solve(f);

    BodySolution out;
    Eigen::VectorXd accel = accel_free;
    std::vector<BodyJacobian> jacobians;
    if (nc > 0) {
        Eigen::MatrixXd j(nc * nr, nb);
        Eigen::VectorXd rhs(nc * nr);
        for (int c = 0; c < nc; ++c) {
            jacobians.push_back(body_point_jacobian(e, contacts[c].lever_arm));
            for (int r = 0; r < nr; ++r) {
                rhs[c * nr + r] = contacts[c].rhs[act.rows[r]];
                for (int k = 0; k < nb; ++k) j(c * nr + r, k) = jacobians.back()(act.rows[r], act.body[k]);
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
        svd.setThreshold(1e-9);
        const int rank = static_cast<int>(svd.rank());
        const int expected = std::min(detail::expected_contact_rank(nc, opt.sagittal), nb);
        if (rank < expected) {
            std::ostringstream os;
            os << "contact Jacobian rank " << rank << " < " << expected << " for " << nc << " stance feet";
            throw SingularKKT(os.str());
        }
        const Eigen::MatrixXd minv_jt = m_llt.solve(j.transpose());
        const Eigen::MatrixXd delassus = j * minv_jt;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(delassus);
        cod.setThreshold(1e-10);
        const Eigen::VectorXd lambda = cod.solve(rhs - j * accel_free);
        accel = accel_free + minv_jt * lambda;
        out.kkt_residual = (j * accel - rhs).cwiseAbs().maxCoeff();

        for (int c = 0; c < nc; ++c) {
            Vec3 l = Vec3::Zero();
            for (int r = 0; r < nr; ++r) l[act.rows[r]] = lambda[c * nr + r];
            out.grf.legs.push_back(contacts[c].leg);
            out.grf.forces.push_back(l);
            out.grf.wrench += jacobians[c].transpose() * l;
        }
    }
    for (int i = 0; i < nb; ++i) out.accel[act.body[i]] = accel[i];
    return out;
}

// ---------------------------------------------------------------------------
// Full-state operations.
// ---------------------------------------------------------------------------

struct ConstrainedAccel {
    /// Generalized accelerations v_dot_d (body block plus all leg joints).
    GenVec accel = GenVec::Zero();
    GroundReaction grf;
    double kkt_residual = 0.0;
};

inline void check_anchor(const HromState& s, const RobotParams& p, const ContactSet& c, Leg leg,
                         const ModelOptions& opt) {
    const double drift = (foot_position(s, p, leg) - c.anchor(leg)).norm();
    if (drift > opt.anchor_tolerance) {
        std::ostringstream os;
        os << name(leg) << " foot is " << drift << " m from its anchor (tolerance " << opt.anchor_tolerance << ")";
        throw PreconditionDrift(os.str());
    }
}

/// Accelerations and contact multipliers for the given state, contact set and
/// thrust wrench. `leg_accel` holds commanded joint accelerations (zero if omitted);
/// stance entries enter the constraint right-hand side and are then replaced by the
/// values recovered from the contact constraint.
inline ConstrainedAccel constrained_accel(const HromState& s, const RobotParams& p, const ContactSet& contacts,
                                          const ThrustWrench& u, const ModelOptions& opt = {},
                                          const ControlInput* leg_accel = nullptr) {
    contacts.validate();
    const Rotation rot = euler_to_rotation(s.euler);

    std::vector<BodyContact> body_contacts;
    std::vector<Mat3> leg_jac;
    std::vector<Vec3> jdv;
    for (Leg leg : contacts.stance_legs()) {
        check_anchor(s, p, contacts, leg, opt);
        const Mat3 jl = rot * leg_vector_jacobian(s.leg(leg).joints());
        const Vec3 b = foot_jdot_v(s, p, leg);
        const Vec3 cmd = leg_accel ? leg_accel->leg(leg) : Vec3::Zero();
        body_contacts.push_back({leg, foot_lever_arm(s, p, leg), -b - jl * cmd});
        leg_jac.push_back(jl);
        jdv.push_back(b);
    }

    const BodySolution body = solve_body_contact(s.euler, s.euler_rate, p, body_contacts, u, opt);

    ConstrainedAccel out;
    out.accel.head<kBodyDofs>() = body.accel;
    out.grf = body.grf;
    out.kkt_residual = body.kkt_residual;
    if (leg_accel) out.accel.tail<kLegCount * kLegJoints>() = leg_accel->leg_accel;

    const double a = opt.baumgarte_alpha;
    for (std::size_t i = 0; i < body_contacts.size(); ++i) {
        const Leg leg = body_contacts[i].leg;
        const BodyJacobian jb = body_point_jacobian(s.euler, body_contacts[i].lever_arm);
        const Vec3 foot_vel = jb * s.body_twist() + leg_jac[i] * s.leg(leg).rates();
        const Vec3 foot_err = foot_position(s, p, leg) - contacts.anchor(leg);
        const Vec3 target = -(jb * body.accel + jdv[i] + 2.0 * a * foot_vel + a * a * foot_err);
        out.accel.segment<3>(leg_column(leg)) = leg_jac[i].partialPivLu().solve(target);
    }
    if (opt.sagittal) {
        for (Leg leg : kAllLegs) out.accel[leg_column(leg) + 1] = 0.0;
    }
    return out;
}

/// Stance-leg joint rates that hold each stance foot fixed for the current body twist.
inline Vec3 stance_leg_rates(const HromState& s, const RobotParams& p, Leg leg) {
    const Mat3 jl = euler_to_rotation(s.euler) * leg_vector_jacobian(s.leg(leg).joints());
    const BodyJacobian jb = body_point_jacobian(s.euler, foot_lever_arm(s, p, leg));
    return jl.partialPivLu().solve(-(jb * s.body_twist()));
}

/// Stance-leg joint accelerations that make the body accelerate by `body_accel`
/// while the feet stay on their anchors (the leg drive).
inline ControlInput stance_leg_drive(const HromState& s, const RobotParams& p, const ContactSet& contacts,
                                     const Vec6& body_accel, ControlInput u = {}) {
    const Rotation rot = euler_to_rotation(s.euler);
    for (Leg leg : contacts.stance_legs()) {
        const Mat3 jl = rot * leg_vector_jacobian(s.leg(leg).joints());
        const BodyJacobian jb = body_point_jacobian(s.euler, foot_lever_arm(s, p, leg));
        u.set_leg(leg, jl.partialPivLu().solve(-(jb * body_accel + foot_jdot_v(s, p, leg))));
    }
    return u;
}

struct StateDerivative {
    StateVec xdot = StateVec::Zero();
    GroundReaction grf;
    double kkt_residual = 0.0;
};

/// x_dot = f(x, u). Stance-leg coordinate rates are the inverse-kinematic rates
/// implied by the body twist; swing legs integrate their own rates.
inline StateDerivative state_derivative(const HromState& s, const RobotParams& p, const ContactSet& contacts,
                                        const ControlInput& u, const ModelOptions& opt = {}) {
    const ConstrainedAccel acc = constrained_accel(s, p, contacts, u.wrench, opt, &u);
    StateDerivative out;
    GenVec qdot = s.velocities();
    for (Leg leg : contacts.stance_legs()) qdot.segment<3>(leg_column(leg)) = stance_leg_rates(s, p, leg);
    if (opt.sagittal) {
        for (Leg leg : kAllLegs) qdot[leg_column(leg) + 1] = 0.0;
    }
    out.xdot << qdot, acc.accel;
    out.grf = acc.grf;
    out.kkt_residual = acc.kkt_residual;
    return out;
}

/// One classical Runge-Kutta step of x_dot = f(x).
template <class Derivative>
StateVec rk4_step(const StateVec& x, double dt, Derivative&& f) {
    const StateVec k1 = f(x);
    const StateVec k2 = f(x + 0.5 * dt * k1);
    const StateVec k3 = f(x + 0.5 * dt * k2);
    const StateVec k4 = f(x + dt * k3);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace wair

#endif  // WAIR_DYNAMICS_HPP
