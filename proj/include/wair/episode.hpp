#ifndef WAIR_EPISODE_HPP
#define WAIR_EPISODE_HPP

// Full episode: plan footholds, then for each gait phase solve the torso NLP,
// play the optimal wrench back open loop and integrate the HROM with RK4.

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "wair/body_model.hpp"
#include "wair/collocation.hpp"
#include "wair/gait.hpp"
#include "wair/nlp.hpp"
#include "wair/scenario.hpp"

namespace wair {

struct FootSample {
    bool stance = false;
    Vec3 position = Vec3::Zero();
    Vec3 force = Vec3::Zero();  // world frame
    Vec3 normal = Vec3::UnitZ();
    double normal_force = 0.0;
    double tangential_force = 0.0;
    /// |lambda_t| / lambda_n; infinity when lambda_n <= 0. Zero for swing feet.
    double friction_ratio = 0.0;
    double normal_margin = 0.0;  // lambda_n - n_min
    double cone_margin = 0.0;    // mu lambda_n - |lambda_t|
};

struct TrajectorySample {
    double t = 0.0;
    int phase = 0;
    HromState state;
    /// Applied thrust wrench, body frame (f, m).
    Vec6 wrench = Vec6::Zero();
    std::array<FootSample, kLegCount> feet{};
    double kinetic_energy = 0.0;
    double potential_energy = 0.0;
    /// ||J v_dot + J_dot v||_inf before Baumgarte, at this sample.
    double kkt_residual = 0.0;
};

struct PhaseRecord {
    int index = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    bool solved = false;
    SolveReport report;
    std::string solver_log;
    std::vector<double> node_times;
    std::vector<Vec6> node_thrust;
    /// Largest stance-foot distance from its anchor before re-projection.
    double max_anchor_drift = 0.0;
    double max_kkt_residual = 0.0;
    /// Distance and speed of the touchdown feet when the phase starts.
    double touchdown_gap = 0.0;
    double touchdown_speed = 0.0;
};

struct Trajectory {
    std::string scenario_hash;
    std::vector<TrajectorySample> samples;
    std::vector<PhaseRecord> phases;
    FootholdPlan plan;
    double duration = 0.0;
    double sample_period = 0.0;
    /// Body reaches the first slope vertex (infinity on flat-only terrain).
    double slope_start = std::numeric_limits<double>::infinity();
    /// Start of the first phase with a stance foot off the first (flat) segment.
    double flat_end = 0.0;
    double max_kkt_residual = 0.0;
    std::size_t accel_calls = 0;
    bool complete = false;

    bool in_slope_phase(double t) const { return t >= slope_start - 1e-9; }
    bool in_flat_window(double t) const { return t < flat_end - 1e-9; }
};

class PhaseSolveFailed : public Error {
public:
    PhaseSolveFailed(int phase, SolveReport report, std::shared_ptr<Trajectory> partial)
        : Error(message(phase, report)), phase_(phase), report_(report), partial_(std::move(partial)) {}

    int phase() const { return phase_; }
    const SolveReport& report() const { return report_; }
    const std::shared_ptr<Trajectory>& partial() const { return partial_; }

private:
    static std::string message(int phase, const SolveReport& r) {
        std::ostringstream os;
        os << "phase " << phase << " NLP ended with status " << to_string(r.status) << " (violation "
           << r.max_violation << ")";
        return os.str();
    }
    int phase_;
    SolveReport report_;
    std::shared_ptr<Trajectory> partial_;
};

namespace detail {

/// Contact constraint residual with the commanded (pre-Baumgarte) leg accelerations.
inline double contact_residual(const HromState& s, const RobotParams& p, const ContactSet& c, const Vec6& body_accel,
                               const ControlInput& drive) {
    double r = 0.0;
    GenVec a = GenVec::Zero();
    a.head<kBodyDofs>() = body_accel;
    a.tail<kLegCount * kLegJoints>() = drive.leg_accel;
    for (Leg leg : c.stance_legs())
        r = std::max(r, (foot_jacobian(s, p, leg) * a + foot_jdot_v(s, p, leg)).cwiseAbs().maxCoeff());
    return r;
}

/// Put the foot of `leg` at `target` with world velocity `target_vel`.
inline void place_leg(HromState& s, const RobotParams& p, Leg leg, const Vec3& target, const Vec3& target_vel) {
    const Rotation r = euler_to_rotation(s.euler);
    s.leg(leg).set_joints(leg_inverse_kinematics(r.transpose() * (target - hip_position(s, p, leg))));
    const Mat3 jl = r * leg_vector_jacobian(s.leg(leg).joints());
    const BodyJacobian jb = body_point_jacobian(s.euler, foot_lever_arm(s, p, leg));
    s.leg(leg).set_rates(jl.partialPivLu().solve(target_vel - jb * s.body_twist()));
}

inline Vec6 interpolate_thrust(const std::vector<double>& t, const std::vector<Vec6>& u, double tt) {
    if (u.empty()) return Vec6::Zero();
    if (tt <= t.front()) return u.front();
    if (tt >= t.back()) return u.back();
    std::size_t j = std::upper_bound(t.begin(), t.end(), tt) - t.begin() - 1;
    return interpolate_control(u[j], u[j + 1], t[j], t[j + 1], tt);
}

inline FootSample foot_sample(const Vec3& position, const Vec3& force, const Vec3& normal, double mu, double n_min) {
    FootSample f;
    f.stance = true;
    f.position = position;
    f.force = force;
    f.normal = normal;
    f.normal_force = force.dot(normal);
    f.tangential_force = (force - f.normal_force * normal).norm();
    f.friction_ratio =
        f.normal_force > 0.0 ? f.tangential_force / f.normal_force : std::numeric_limits<double>::infinity();
    f.normal_margin = f.normal_force - n_min;
    f.cone_margin = mu * f.normal_force - f.tangential_force;
    return f;
}

}  // namespace detail

/// Contact set of gait phase k with anchors from the plan.
inline ContactSet phase_contacts(const Terrain& terrain, const FootholdPlan& plan, const GaitPhase& ph) {
    ContactSet c;
    double mu = std::numeric_limits<double>::infinity();
    for (Leg leg : ph.stance_legs()) {
        const Vec3& a = plan.phases[ph.index].start[index(leg)];
        c.set_stance(leg, a, terrain.normal(a.x()));
        mu = std::min(mu, terrain.friction(a.x()));
    }
    c.friction = mu;
    return c;
}

inline FootholdLattice scenario_lattice(const Scenario& s) {
    std::vector<double> lateral;
    for (Leg leg : kAllLegs) lateral.push_back(s.reference.lateral_y + s.robot.hip(leg).y());
    std::sort(lateral.begin(), lateral.end());
    lateral.erase(std::unique(lateral.begin(), lateral.end(),
                              [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                  lateral.end());
    const double reach = s.robot.leg_length_max + std::abs(s.robot.hip_offsets[0].x()) + 0.5;
    const double travel = s.reference.speed * s.duration;
    const double a0 = s.terrain.arc_length(s.reference.start_x);
    return make_lattice(s.terrain, s.gait.lattice_spacing, lateral, a0 - reach, a0 + travel + reach);
}

inline Trajectory run_episode(const Scenario& sc) {
    sc.validate();
    const RobotParams& p = sc.robot;
    const ReferenceTrajectory ref(sc.terrain, sc.reference);
    const GaitSchedule gait(sc.gait.period, sc.duration);
    const FootholdLattice lattice = scenario_lattice(sc);

    auto traj = std::make_shared<Trajectory>();
    Trajectory& out = *traj;
    out.scenario_hash = scenario_hash_hex(sc);
    out.plan = select_footholds(sc.terrain, lattice, ref, gait, p, sc.gait);
    out.duration = sc.duration;
    out.sample_period = 1.0 / sc.integration.log_rate;
    if (ref.vertex_count() > 0) out.slope_start = ref.vertex_time(1);
    out.flat_end = sc.duration;
    const double flat_x_end =
        sc.terrain.segments().size() > 1 ? sc.terrain.segments()[1].start_x : std::numeric_limits<double>::infinity();
    for (const GaitPhase& ph : gait.phases()) {
        bool off_flat = false;
        for (Leg leg : ph.stance_legs()) off_flat = off_flat || out.plan.phases[ph.index].start[index(leg)].x() >= flat_x_end;
        if (off_flat) {
            out.flat_end = ph.t_start;
            break;
        }
    }

    ModelOptions model = sc.collocation.model;
    model.sagittal = sc.sagittal;
    model.anchor_tolerance = sc.integration.anchor_tolerance;
    CollocationOptions copt = sc.collocation;
    copt.model.sagittal = sc.sagittal;
    const ReferenceFunction ref_fn = [&ref](double t) { return ref.at(t); };

    // Initial state: torso on the reference, every foot on its first lattice point.
    HromState s;
    apply_reference(s, ref.at(0.0));
    for (Leg leg : kAllLegs) detail::place_leg(s, p, leg, out.plan.phases[0].start[index(leg)], Vec3::Zero());

    const double dt = sc.integration.dt;
    const int steps_per_phase = static_cast<int>(std::lround(sc.gait.period / dt));
    const int steps_per_sample = static_cast<int>(std::lround(1.0 / (sc.integration.log_rate * dt)));
    const double n_min = sc.collocation.n_min;

    auto record = [&](double t, const HromState& st, const ContactSet& c, const Vec6& u, int phase) {
        TrajectorySample smp;
        smp.t = t;
        smp.phase = phase;
        smp.state = st;
        smp.wrench = u;
        const BodyReference r = ref.at(t);
        const Vec6 a_cmd = tracking_accel(r, st.body_pose(), st.body_twist(), copt.gains, model);
        ControlInput in = stance_leg_drive(st, p, c, a_cmd);
        in.wrench = ThrustWrench::from_vector(u, Frame::Body);
        const ConstrainedAccel acc = constrained_accel(st, p, c, in.wrench, model, &in);
        smp.kkt_residual = detail::contact_residual(st, p, c, acc.accel.head<kBodyDofs>(), in);
        for (Leg leg : kAllLegs) {
            FootSample& f = smp.feet[index(leg)];
            f.position = foot_position(st, p, leg);
            if (const auto lam = acc.grf.force(leg))
                f = detail::foot_sample(f.position, *lam, c.normal(leg), c.friction, n_min);
        }
        smp.kinetic_energy = kinetic_energy(st, p);
        smp.potential_energy = potential_energy(st, p);
        out.samples.push_back(smp);
    };

    ContactSet contacts;
    std::vector<double> node_t;
    std::vector<Vec6> node_u;
    for (const GaitPhase& ph : gait.phases()) {
        PhaseRecord rec;
        rec.index = ph.index;
        rec.t_start = ph.t_start;
        rec.t_end = ph.t_end;
        contacts = phase_contacts(sc.terrain, out.plan, ph);

        // Touchdown: the arriving feet must already sit on their anchors; no impact map.
        for (Leg leg : ph.stance_legs()) {
            rec.touchdown_gap = std::max(rec.touchdown_gap, (foot_position(s, p, leg) - contacts.anchor(leg)).norm());
            rec.touchdown_speed = std::max(rec.touchdown_speed, foot_velocity(s, p, leg).norm());
        }
        if (rec.touchdown_gap > sc.integration.touchdown_tolerance) {
            std::ostringstream os;
            os << "touchdown foot is " << rec.touchdown_gap << " m from its anchor at t = " << ph.t_start;
            throw PreconditionDrift(os.str());
        }
        for (Leg leg : ph.stance_legs()) detail::place_leg(s, p, leg, contacts.anchor(leg), Vec3::Zero());

        std::map<int, SwingCurve> swing;
        for (Leg leg : ph.swing_legs()) {
            const auto& pf = out.plan.phases[ph.index];
            const Vec3 n = (sc.terrain.normal(pf.start[index(leg)].x()) + sc.terrain.normal(pf.end[index(leg)].x()))
                               .normalized();
            swing.emplace(index(leg), swing_trajectory(pf.start[index(leg)], pf.end[index(leg)], sc.gait.clearance,
                                                       ph.duration(), n));
        }

        const NodeGrid grid = NodeGrid::uniform(ph.t_start, ph.t_end, copt.nodes, contacts);
        node_t = grid.times;
        node_u.assign(grid.times.size(), Vec6::Zero());
        if (sc.thrust) {
            const CollocationProblem prob(p, grid, ref_fn, body_state(s), copt);
            SolverOptions so = sc.solver;
            so.seed = sc.seed + static_cast<std::uint64_t>(ph.index);
            std::ostringstream log;
            so.log = &log;
            const SolveResult res = solve(prob.nlp(), so);
            rec.solved = true;
            rec.report = res.report;
            rec.solver_log = log.str();
            if (res.report.status != SolveStatus::Converged) {
                out.phases.push_back(rec);
                throw PhaseSolveFailed(ph.index, res.report, traj);
            }
            node_u = prob.decision(res.x).U;
        }
        rec.node_times = node_t;
        rec.node_thrust = node_u;

        for (int i = 0; i < steps_per_phase; ++i) {
            const double t = ph.t_start + i * dt;
            const long global_step = std::lround(t / dt);
            if (global_step % steps_per_sample == 0) record(t, s, contacts, detail::interpolate_thrust(node_t, node_u, t), ph.index);

            double stage_time = t;
            auto f = [&](const StateVec& x) -> StateVec {
                const HromState st = HromState::from_vector(x);
                const Vec6 a_cmd =
                    tracking_accel(ref.at(stage_time), st.body_pose(), st.body_twist(), copt.gains, model);
                ControlInput in = stance_leg_drive(st, p, contacts, a_cmd);
                in.wrench = ThrustWrench::from_vector(detail::interpolate_thrust(node_t, node_u, stage_time), Frame::Body);
                const StateDerivative d = state_derivative(st, p, contacts, in, model);
                const double r = detail::contact_residual(st, p, contacts, d.xdot.segment<kBodyDofs>(kDofs), in);
                rec.max_kkt_residual = std::max(rec.max_kkt_residual, r);
                ++out.accel_calls;
                return d.xdot;
            };
            // Stage times follow the classical RK4 tableau: t, t + dt/2 (twice), t + dt.
            const StateVec x = s.to_vector();
            const StateVec k1 = f(x);
            stage_time = t + 0.5 * dt;
            const StateVec k2 = f(x + 0.5 * dt * k1);
            const StateVec k3 = f(x + 0.5 * dt * k2);
            stage_time = t + dt;
            const StateVec k4 = f(x + dt * k3);
            s = HromState::from_vector(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));

            const Vec6 pose = s.body_pose(), twist = s.body_twist();
            if (!s.to_vector().allFinite() || pose.cwiseAbs().maxCoeff() > sc.integration.divergence_limit ||
                twist.cwiseAbs().maxCoeff() > sc.integration.divergence_limit) {
                std::ostringstream os;
                os << "torso state diverged at t = " << t + dt;
                throw IntegrationDiverged(os.str());
            }
            for (Leg leg : ph.stance_legs()) {
                rec.max_anchor_drift =
                    std::max(rec.max_anchor_drift, (foot_position(s, p, leg) - contacts.anchor(leg)).norm());
                detail::place_leg(s, p, leg, contacts.anchor(leg), Vec3::Zero());
            }
            const double tau = (i + 1) * dt;
            for (const auto& [li, curve] : swing) {
                const Leg leg = kAllLegs[li];
                detail::place_leg(s, p, leg, curve.position_at_time(tau), curve.velocity_at_time(tau));
            }
        }
        out.max_kkt_residual = std::max(out.max_kkt_residual, rec.max_kkt_residual);
        out.phases.push_back(rec);
    }
    record(sc.duration, s, contacts, node_u.empty() ? Vec6::Zero() : node_u.back(), gait.phases().back().index);
    out.complete = true;
    return out;
}

}  // namespace wair

#endif  // WAIR_EPISODE_HPP
