#ifndef WAIR_COLLOCATION_HPP
#define WAIR_COLLOCATION_HPP

// Hermite-Simpson transcription of the thrust-wrench problem.
//
// Decision vector (fixed packing):
//   y = [x_0 .. x_{n-1} | u_0 .. u_{n-1} | t_f?]
// with x_k the 12-D torso state (p, yaw, pitch, roll, v, Euler rates) and
// u_k = (f_t, m_t) in the body frame. Leg joints are not decision variables:
// stance legs are implied by the anchors, swing legs do not affect the torso.
//
// Equalities:   x_0 - x_init, Hermite-Simpson midpoint defects, optional x_{n-1} - x_ref.
// Inequalities: per node and stance foot, normal force above n_min, friction
//               cone, and leg reach l_min <= |anchor - hip| <= l_max.
// Bounds:       |f_t|_inf <= f_max, |m_t|_inf <= m_max, frozen coordinates pinned.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wair/body_model.hpp"
#include "wair/errors.hpp"
#include "wair/gait.hpp"
#include "wair/nlp.hpp"

namespace wair {

// ---------------------------------------------------------------------------
// Interpolants and defects
// ---------------------------------------------------------------------------

inline VectorXd interpolate_control(const VectorXd& ui, const VectorXd& uj, double ti, double tj, double t) {
    const double s = (t - ti) / (tj - ti);
    if (s == 0.0) return ui;
    if (s == 1.0) return uj;
    return ui + s * (uj - ui);
}

/// Cubic x(t) = sum_k c_k ((t - t_j) / h)^k matching values and slopes at both ends.
struct HermiteCubic {
    VectorXd c0, c1, c2, c3;
    double t0 = 0.0;
    double h = 1.0;

    VectorXd value(double t) const {
        const double s = (t - t0) / h;
        return c0 + s * (c1 + s * (c2 + s * c3));
    }
    VectorXd derivative(double t) const {
        const double s = (t - t0) / h;
        return (c1 + s * (2.0 * c2 + 3.0 * s * c3)) / h;
    }
};

inline HermiteCubic hermite_cubic(const VectorXd& xj, const VectorXd& xj1, const VectorXd& fj, const VectorXd& fj1,
                                  double tj, double tj1) {
    const double h = tj1 - tj;
    HermiteCubic c;
    c.t0 = tj;
    c.h = h;
    c.c0 = xj;
    c.c1 = h * fj;
    c.c2 = -3.0 * xj - 2.0 * h * fj + 3.0 * xj1 - h * fj1;
    c.c3 = 2.0 * xj + h * fj - 2.0 * xj1 + h * fj1;
    return c;
}

inline VectorXd interpolate_state(const VectorXd& xj, const VectorXd& xj1, const VectorXd& fj, const VectorXd& fj1,
                                  double tj, double tj1, double t) {
    return hermite_cubic(xj, xj1, fj, fj1, tj, tj1).value(t);
}

/// Midpoint defect dx~/dt(t_m) - f(x~(t_m), u~(t_m), t_m) given endpoint slopes.
template <class Dynamics>
VectorXd collocation_defect(const VectorXd& xj, const VectorXd& xj1, const VectorXd& fj, const VectorXd& fj1,
                            const VectorXd& uj, const VectorXd& uj1, Dynamics&& f, double tj, double tj1) {
    const HermiteCubic c = hermite_cubic(xj, xj1, fj, fj1, tj, tj1);
    const double tm = 0.5 * (tj + tj1);
    return c.derivative(tm) - f(c.value(tm), interpolate_control(uj, uj1, tj, tj1, tm), tm);
}

template <class Dynamics>
VectorXd collocation_defect(const VectorXd& xj, const VectorXd& xj1, const VectorXd& uj, const VectorXd& uj1,
                            Dynamics&& f, double tj, double tj1) {
    return collocation_defect(xj, xj1, VectorXd(f(xj, uj, tj)), VectorXd(f(xj1, uj1, tj1)), uj, uj1, f, tj, tj1);
}

// ---------------------------------------------------------------------------
// Friction cone
// ---------------------------------------------------------------------------

enum class ConeModel { Exact, Pyramid };

/// Orthonormal tangent basis of the plane with normal n (t1 follows +x where possible).
inline std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
    Vec3 t1 = Vec3::UnitX() - n.x() * n;
    if (t1.norm() < 1e-6) t1 = Vec3::UnitY() - n.y() * n;
    t1.normalize();
    return {t1, n.cross(t1)};
}

/// Per stance foot (in grf order): [lambda_n - n_min, cone rows...]. The exact
/// cone gives one row mu lambda_n - |lambda_t|; the pyramid gives four rows
/// mu lambda_n -+ lambda_t1, mu lambda_n -+ lambda_t2. `smoothing` replaces
/// |lambda_t| by sqrt(|lambda_t|^2 + smoothing^2).
inline VectorXd friction_cone_constraints(const GroundReaction& grf, const ContactSet& contacts, double n_min,
                                          ConeModel model = ConeModel::Exact, double mu = -1.0,
                                          double smoothing = 0.0) {
    if (grf.legs.empty()) throw NoStanceFeet("friction cone requested with no stance feet");
    if (mu < 0.0) mu = contacts.friction;
    const int rows = model == ConeModel::Exact ? 2 : 5;
    VectorXd out(rows * static_cast<int>(grf.legs.size()));
    for (std::size_t i = 0; i < grf.legs.size(); ++i) {
        const Vec3& n = contacts.normal(grf.legs[i]);
        const Vec3& l = grf.forces[i];
        const double ln = l.dot(n);
        const Vec3 lt = l - ln * n;
        const int r = rows * static_cast<int>(i);
        out[r] = ln - n_min;
        if (model == ConeModel::Exact) {
            out[r + 1] = mu * ln - std::sqrt(lt.squaredNorm() + smoothing * smoothing);
        } else {
            const auto [t1, t2] = tangent_basis(n);
            out[r + 1] = mu * ln - l.dot(t1);
            out[r + 2] = mu * ln + l.dot(t1);
            out[r + 3] = mu * ln - l.dot(t2);
            out[r + 4] = mu * ln + l.dot(t2);
        }
    }
    return out;
}

/// Effective friction ratio |lambda_t| / lambda_n (infinite when lambda_n <= 0).
inline double friction_ratio(const Vec3& lambda, const Vec3& n) {
    const double ln = lambda.dot(n);
    const double lt = (lambda - ln * n).norm();
    return ln > 0.0 ? lt / ln : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Cost
// ---------------------------------------------------------------------------

struct CostWeights {
    Vec3 w1 = Vec3::Ones();
    Vec3 w2 = Vec3::Ones();

    void validate() const {
        if ((w1.array() <= 0.0).any()) throw ConfigError("collocation.weights.w1", "entries must be positive");
        if ((w2.array() <= 0.0).any()) throw ConfigError("collocation.weights.w2", "entries must be positive");
    }
};

/// Trapezoidal weights of a time grid.
inline std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double h = t[k + 1] - t[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    return w;
}

inline double node_effort(const Vec6& u, const CostWeights& w) {
    return 0.5 * (u.head<3>().cwiseProduct(w.w1).dot(u.head<3>()) + u.tail<3>().cwiseProduct(w.w2).dot(u.tail<3>()));
}

inline double cost(const std::vector<Vec6>& U, const CostWeights& w, const std::vector<double>& times) {
    const auto tw = trapezoid_weights(times);
    double j = 0.0;
    for (std::size_t k = 0; k < U.size(); ++k) j += tw[k] * node_effort(U[k], w);
    return j;
}

// ---------------------------------------------------------------------------
// Grid and layout
// ---------------------------------------------------------------------------

struct NodeGrid {
    std::vector<double> times;
    /// Contact set used by the inequalities at each node.
    std::vector<ContactSet> node_contacts;
    /// Contact set of each interval (constant inside it).
    std::vector<ContactSet> interval_contacts;

    int size() const { return static_cast<int>(times.size()); }

    static NodeGrid uniform(double t0, double t1, int n, const ContactSet& c) {
        NodeGrid g;
        for (int k = 0; k < n; ++k) g.times.push_back(t0 + (t1 - t0) * k / (n - 1));
        g.node_contacts.assign(n, c);
        g.interval_contacts.assign(n - 1, c);
        g.validate();
        return g;
    }

    void validate() const {
        if (times.size() < 2) throw ConfigError("collocation.nodes", "need at least two nodes");
        for (std::size_t k = 0; k + 1 < times.size(); ++k)
            if (!(times[k + 1] > times[k])) throw ConfigError("collocation.nodes", "node times must increase");
        if (node_contacts.size() != times.size() || interval_contacts.size() + 1 != times.size())
            throw ConfigError("collocation.nodes", "contact assignment does not match the grid");
    }
};

/// Uniform grid on [t0, t1] with contacts from the gait. Every phase boundary
/// strictly inside the window must coincide with a node.
inline NodeGrid make_node_grid(double t0, double t1, int n, const GaitSchedule& gait,
                               const std::function<ContactSet(std::size_t)>& contacts_of_phase) {
    NodeGrid g;
    for (int k = 0; k < n; ++k) g.times.push_back(k + 1 == n ? t1 : t0 + (t1 - t0) * k / (n - 1));
    for (const GaitPhase& ph : gait.phases()) {
        const double tb = ph.t_start;
        if (tb <= t0 + 1e-9 || tb >= t1 - 1e-9) continue;
        bool aligned = false;
        for (double t : g.times) aligned = aligned || std::abs(t - tb) < 1e-9;
        if (!aligned) {
            std::ostringstream os;
            os << "contact switch at t = " << tb << " falls inside a collocation interval";
            throw GridMisaligned(os.str());
        }
    }
    for (int k = 0; k < n; ++k) {
        const double t = k + 1 == n ? 0.5 * (g.times[k - 1] + g.times[k]) : g.times[k];
        g.node_contacts.push_back(contacts_of_phase(gait.phase_index(t)));
    }
    for (int k = 0; k + 1 < n; ++k)
        g.interval_contacts.push_back(contacts_of_phase(gait.phase_index(0.5 * (g.times[k] + g.times[k + 1]))));
    g.validate();
    return g;
}

struct DecisionLayout {
    int nodes = 0;
    bool free_final_time = false;

    int size() const { return nodes * (kBodyStateDim + 6) + (free_final_time ? 1 : 0); }
    int x(int k) const { return k * kBodyStateDim; }
    int u(int k) const { return nodes * kBodyStateDim + 6 * k; }
    int tf() const { return nodes * (kBodyStateDim + 6); }
};

struct Decision {
    std::vector<BodyStateVec> X;
    std::vector<Vec6> U;
    double t_final = 0.0;
};

inline VectorXd pack(const Decision& d, const DecisionLayout& l) {
    VectorXd y(l.size());
    for (int k = 0; k < l.nodes; ++k) {
        y.segment<kBodyStateDim>(l.x(k)) = d.X[k];
        y.segment<6>(l.u(k)) = d.U[k];
    }
    if (l.free_final_time) y[l.tf()] = d.t_final;
    return y;
}

inline Decision unpack(const VectorXd& y, const DecisionLayout& l, double t_final = 0.0) {
    Decision d;
    for (int k = 0; k < l.nodes; ++k) {
        d.X.push_back(y.segment<kBodyStateDim>(l.x(k)));
        d.U.push_back(y.segment<6>(l.u(k)));
    }
    d.t_final = l.free_final_time ? y[l.tf()] : t_final;
    return d;
}

// ---------------------------------------------------------------------------
// Constraint bookkeeping
// ---------------------------------------------------------------------------

enum class ConstraintKind { InitialState, Defect, TerminalState, NormalForce, FrictionCone, ReachMin, ReachMax };

inline const char* to_string(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::InitialState: return "initial_state";
        case ConstraintKind::Defect: return "defect";
        case ConstraintKind::TerminalState: return "terminal_state";
        case ConstraintKind::NormalForce: return "normal_force";
        case ConstraintKind::FrictionCone: return "friction_cone";
        case ConstraintKind::ReachMin: return "reach_min";
        case ConstraintKind::ReachMax: return "reach_max";
    }
    return "unknown";
}

struct ConstraintInfo {
    ConstraintKind kind;
    int node = 0;       // node (or interval start) index
    int component = 0;  // state component or cone row
    int leg = -1;
    double tolerance = 1e-6;
};

struct ConstraintSet {
    std::vector<ConstraintInfo> equalities;    // c = 0
    std::vector<ConstraintInfo> inequalities;  // g >= 0
};

struct CollocationOptions {
    int nodes = 11;
    double n_min = 5.0;
    double f_max = 60.0;
    double m_max = 15.0;
    ConeModel cone = ConeModel::Exact;
    /// Friction coefficient used inside the optimizer is mu - cone_margin.
    double cone_margin = 0.02;
    /// Normal-force floor used inside the optimizer is n_min + normal_margin.
    double normal_margin = 0.5;
    bool terminal_condition = false;
    bool free_final_time = false;
    double defect_tolerance = 1e-6;
    double constraint_tolerance = 1e-6;
    CostWeights weights;
    TrackingGains gains;
    ModelOptions model;

    void validate() const {
        if (nodes < 2) throw ConfigError("collocation.nodes", "need at least two nodes");
        if (!(n_min >= 0.0)) throw ConfigError("collocation.n_min", "must be non-negative");
        if (!(f_max > 0.0)) throw ConfigError("collocation.f_max", "must be positive");
        if (!(m_max > 0.0)) throw ConfigError("collocation.m_max", "must be positive");
        if (!(cone_margin >= 0.0)) throw ConfigError("collocation.cone_margin", "must be non-negative");
        weights.validate();
    }
};

using ReferenceFunction = std::function<BodyReference(double)>;

/// Per-node diagnostic: torso accelerations and multipliers at a decision point.
struct NodeSolution {
    double t = 0.0;
    BodyStateVec x = BodyStateVec::Zero();
    Vec6 u = Vec6::Zero();
    BodySolution body;
};

class CollocationProblem {
public:
    CollocationProblem(RobotParams params, NodeGrid grid, ReferenceFunction reference, const BodyStateVec& initial,
                       CollocationOptions opt)
        : params_(std::move(params)),
          grid_(std::move(grid)),
          reference_(std::move(reference)),
          initial_(initial),
          opt_(opt) {
        opt_.validate();
        grid_.validate();
        layout_.nodes = grid_.size();
        layout_.free_final_time = opt_.free_final_time;
        if (opt_.free_final_time) {
            for (std::size_t k = 1; k < grid_.interval_contacts.size(); ++k)
                if (grid_.interval_contacts[k].stance != grid_.interval_contacts[0].stance)
                    throw GridMisaligned("free final time requires a single contact set");
        }
        weight_ = params_.weight();
        build_constraint_set();
        build_bounds();
        build_guess();
    }

    const RobotParams& params() const { return params_; }
    const NodeGrid& grid() const { return grid_; }
    const CollocationOptions& options() const { return opt_; }
    const DecisionLayout& layout() const { return layout_; }
    const ConstraintSet& constraint_set() const { return constraints_; }
    const VectorXd& initial_guess() const { return guess_; }
    const VectorXd& lower() const { return lower_; }
    const VectorXd& upper() const { return upper_; }
    const BodyStateVec& initial_state() const { return initial_; }
    const ReferenceFunction& reference() const { return reference_; }
    double design_friction(const ContactSet& c) const { return c.friction - opt_.cone_margin; }

    /// Node times for a decision vector (differs from the grid only with free t_f).
    std::vector<double> times(const VectorXd& y) const {
        if (!layout_.free_final_time) return grid_.times;
        std::vector<double> t(grid_.times.size());
        const double t0 = grid_.times.front(), span = y[layout_.tf()] - t0;
        const double base = grid_.times.back() - t0;
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = t0 + (grid_.times[k] - t0) / base * span;
        return t;
    }

    /// Torso dynamics x_dot = f(x, u, t) for a given contact set.
    BodyStateVec dynamics(const BodyStateVec& x, const Vec6& u, double t, const ContactSet& c,
                          BodySolution* sol = nullptr) const {
        const BodySolution s = solve(x, u, t, c);
        BodyStateVec xd;
        xd << x.tail<6>(), s.accel;
        if (sol) *sol = s;
        return xd;
    }

    BodySolution solve(const BodyStateVec& x, const Vec6& u, double t, const ContactSet& c) const {
        const Vec6 a_cmd = tracking_accel(reference_(t), x.head<6>(), x.tail<6>(), opt_.gains, opt_.model);
        return body_dynamics(x, params_, body_stance(c), ThrustWrench::from_vector(u), a_cmd, opt_.model);
    }

    NodeSolution node_solution(const VectorXd& y, int k) const {
        const auto t = times(y);
        NodeSolution n;
        n.t = t[k];
        n.x = y.segment<kBodyStateDim>(layout_.x(k));
        n.u = y.segment<6>(layout_.u(k));
        n.body = solve(n.x, n.u, n.t, grid_.node_contacts[k]);
        return n;
    }

    void evaluate(const VectorXd& y, VectorXd& eq, VectorXd& ineq) const {
        const int n = layout_.nodes;
        const auto t = times(y);
        eq.resize(static_cast<int>(constraints_.equalities.size()));
        ineq.resize(static_cast<int>(constraints_.inequalities.size()));
        int e = 0, g = 0;
        eq.segment<kBodyStateDim>(e) = y.segment<kBodyStateDim>(layout_.x(0)) - initial_;
        e += kBodyStateDim;

        std::vector<BodyStateVec> f(n);
        std::vector<BodySolution> sol(n);
        for (int k = 0; k < n; ++k)
            f[k] = dynamics(y.segment<kBodyStateDim>(layout_.x(k)), y.segment<6>(layout_.u(k)), t[k],
                            grid_.node_contacts[k], &sol[k]);
        for (int j = 0; j + 1 < n; ++j) {
            const ContactSet& c = grid_.interval_contacts[j];
            const BodyStateVec xj = y.segment<kBodyStateDim>(layout_.x(j));
            const BodyStateVec xj1 = y.segment<kBodyStateDim>(layout_.x(j + 1));
            const Vec6 uj = y.segment<6>(layout_.u(j)), uj1 = y.segment<6>(layout_.u(j + 1));
            const BodyStateVec fj = c.stance == grid_.node_contacts[j].stance ? f[j] : dynamics(xj, uj, t[j], c);
            const BodyStateVec fj1 =
                c.stance == grid_.node_contacts[j + 1].stance ? f[j + 1] : dynamics(xj1, uj1, t[j + 1], c);
            auto dyn = [&](const VectorXd& x, const VectorXd& u, double tt) -> VectorXd {
                return dynamics(x, u, tt, c);
            };
            eq.segment<kBodyStateDim>(e) = collocation_defect(xj, xj1, fj, fj1, uj, uj1, dyn, t[j], t[j + 1]);
            e += kBodyStateDim;
        }
        if (opt_.terminal_condition) {
            eq.segment<kBodyStateDim>(e) =
                y.segment<kBodyStateDim>(layout_.x(n - 1)) - body_state(reference_(t[n - 1]));
            e += kBodyStateDim;
        }

        for (int k = 0; k < n; ++k) {
            const ContactSet& c = grid_.node_contacts[k];
            if (c.stance_count() == 0) continue;
            const VectorXd cone = friction_cone_constraints(sol[k].grf, c, opt_.n_min + opt_.normal_margin, opt_.cone,
                                                            design_friction(c), kConeSmoothing);
            ineq.segment(g, cone.size()) = cone / weight_;
            g += static_cast<int>(cone.size());
            const BodyStateVec xk = y.segment<kBodyStateDim>(layout_.x(k));
            const Rotation r = euler_to_rotation(EulerZYX::from_vector(xk.segment<3>(3)));
            for (Leg leg : c.stance_legs()) {
                const double l = (c.anchor(leg) - xk.head<3>() - r * params_.hip(leg)).norm();
                ineq[g++] = l - params_.leg_length_min;
                ineq[g++] = params_.leg_length_max - l;
            }
        }
    }

    double objective(const VectorXd& y) const {
        const auto tw = trapezoid_weights(times(y));
        double j = 0.0;
        for (int k = 0; k < layout_.nodes; ++k) j += tw[k] * node_effort(y.segment<6>(layout_.u(k)), opt_.weights);
        return j / (weight_ * weight_);
    }

    VectorXd objective_gradient(const VectorXd& y) const {
        VectorXd g = VectorXd::Zero(layout_.size());
        const auto t = times(y);
        const auto tw = trapezoid_weights(t);
        for (int k = 0; k < layout_.nodes; ++k) {
            const Vec6 u = y.segment<6>(layout_.u(k));
            Vec6 d;
            d << u.head<3>().cwiseProduct(opt_.weights.w1), u.tail<3>().cwiseProduct(opt_.weights.w2);
            g.segment<6>(layout_.u(k)) = tw[k] * d / (weight_ * weight_);
        }
        if (layout_.free_final_time) g[layout_.tf()] = objective(y) / (t.back() - t.front());
        return g;
    }

    /// Physical cost (without the internal scaling by weight^2).
    double effort(const VectorXd& y) const { return objective(y) * weight_ * weight_; }

    std::vector<std::vector<int>> sparsity() const {
        const int n = layout_.nodes;
        std::vector<std::vector<int>> cols(layout_.size());
        const int n_eq = static_cast<int>(constraints_.equalities.size());
        std::vector<std::vector<int>> rows_of_node(n);
        for (int r = 0; r < n_eq; ++r) {
            const auto& ci = constraints_.equalities[r];
            rows_of_node[ci.node].push_back(r);
            if (ci.kind == ConstraintKind::Defect) rows_of_node[ci.node + 1].push_back(r);
        }
        for (int r = 0; r < static_cast<int>(constraints_.inequalities.size()); ++r)
            rows_of_node[constraints_.inequalities[r].node].push_back(n_eq + r);
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < kBodyStateDim; ++i) cols[layout_.x(k) + i] = rows_of_node[k];
            for (int i = 0; i < 6; ++i) cols[layout_.u(k) + i] = rows_of_node[k];
        }
        if (layout_.free_final_time) {
            for (int r = 0; r < n_eq + static_cast<int>(constraints_.inequalities.size()); ++r)
                cols[layout_.tf()].push_back(r);
        }
        return cols;
    }

    /// NLP view; the problem must outlive the returned callables.
    NlpProblem nlp() const {
        NlpProblem p;
        p.n = layout_.size();
        p.n_eq = static_cast<int>(constraints_.equalities.size());
        p.n_ineq = static_cast<int>(constraints_.inequalities.size());
        p.lower = lower_;
        p.upper = upper_;
        p.x0 = guess_;
        p.objective = [this](const VectorXd& y) { return objective(y); };
        p.objective_gradient = [this](const VectorXd& y) { return objective_gradient(y); };
        p.constraints = [this](const VectorXd& y, VectorXd& c, VectorXd& g) { evaluate(y, c, g); };
        p.sparsity = sparsity();
        p.mode = GradientMode::FiniteDifference;
        // Thrust in units of its box limit; states in units of h / 1.5, the
        // inverse sensitivity of a midpoint defect to a node state.
        p.scale = VectorXd::Ones(p.n);
        double h = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k + 1 < grid_.times.size(); ++k) h = std::min(h, grid_.times[k + 1] - grid_.times[k]);
        for (int k = 0; k < layout_.nodes; ++k) {
            p.scale.segment<kBodyStateDim>(layout_.x(k)).setConstant(h / 1.5);
            p.scale.segment<3>(layout_.u(k)).setConstant(opt_.f_max);
            p.scale.segment<3>(layout_.u(k) + 3).setConstant(opt_.m_max);
        }
        return p;
    }

    Decision decision(const VectorXd& y) const { return unpack(y, layout_, grid_.times.back()); }

    /// Serialized problem: grid, contacts, reference samples at every time the
    /// transcription evaluates, options, bounds, guess and constraint metadata.
    nlohmann::json dump(const VectorXd* y = nullptr) const;
    static CollocationProblem load(const nlohmann::json& j);

private:
    static constexpr double kConeSmoothing = 1e-3;  // N

    void build_constraint_set() {
        const int n = layout_.nodes;
        for (int i = 0; i < kBodyStateDim; ++i)
            constraints_.equalities.push_back({ConstraintKind::InitialState, 0, i, -1, opt_.constraint_tolerance});
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i < kBodyStateDim; ++i)
                constraints_.equalities.push_back({ConstraintKind::Defect, j, i, -1, opt_.defect_tolerance});
        if (opt_.terminal_condition)
            for (int i = 0; i < kBodyStateDim; ++i)
                constraints_.equalities.push_back(
                    {ConstraintKind::TerminalState, n - 1, i, -1, opt_.constraint_tolerance});
        const int cone_rows = opt_.cone == ConeModel::Exact ? 1 : 4;
        for (int k = 0; k < n; ++k) {
            const ContactSet& c = grid_.node_contacts[k];
            for (Leg leg : c.stance_legs()) {
                constraints_.inequalities.push_back(
                    {ConstraintKind::NormalForce, k, 0, index(leg), opt_.constraint_tolerance});
                for (int r = 0; r < cone_rows; ++r)
                    constraints_.inequalities.push_back(
                        {ConstraintKind::FrictionCone, k, r, index(leg), opt_.constraint_tolerance});
            }
            for (Leg leg : c.stance_legs()) {
                constraints_.inequalities.push_back(
                    {ConstraintKind::ReachMin, k, 0, index(leg), opt_.constraint_tolerance});
                constraints_.inequalities.push_back(
                    {ConstraintKind::ReachMax, k, 0, index(leg), opt_.constraint_tolerance});
            }
        }
    }

    void build_bounds() {
        const double inf = std::numeric_limits<double>::infinity();
        lower_ = VectorXd::Constant(layout_.size(), -inf);
        upper_ = VectorXd::Constant(layout_.size(), inf);
        std::vector<int> frozen;
        if (opt_.model.sagittal) frozen = {1, 3, 5, 7, 9, 11};
        for (int k = 0; k < layout_.nodes; ++k) {
            const int xo = layout_.x(k), uo = layout_.u(k);
            lower_[xo + 4] = -M_PI / 2.0 + 0.05;
            upper_[xo + 4] = M_PI / 2.0 - 0.05;
            for (int i : frozen) lower_[xo + i] = upper_[xo + i] = initial_[i];
            if (k == 0) {
                lower_.segment<kBodyStateDim>(xo) = initial_;
                upper_.segment<kBodyStateDim>(xo) = initial_;
            }
            for (int i = 0; i < 3; ++i) {
                lower_[uo + i] = -opt_.f_max, upper_[uo + i] = opt_.f_max;
                lower_[uo + 3 + i] = -opt_.m_max, upper_[uo + 3 + i] = opt_.m_max;
            }
            if (opt_.model.sagittal) {
                for (int i : {1, 3, 5}) lower_[uo + i] = upper_[uo + i] = 0.0;
            }
        }
        if (layout_.free_final_time) {
            const double span = grid_.times.back() - grid_.times.front();
            lower_[layout_.tf()] = grid_.times.front() + 0.5 * span;
            upper_[layout_.tf()] = grid_.times.front() + 2.0 * span;
        }
    }

    /// States from an RK4 rollout of the unthrusted torso dynamics (reference
    /// samples if the rollout fails); thrust starts at zero.
    void build_guess() {
        Decision d;
        BodyStateVec x = initial_;
        bool rollout = true;
        const Vec6 u0 = Vec6::Zero();
        for (int k = 0; k < layout_.nodes; ++k) {
            if (k > 0 && rollout) {
                const ContactSet& c = grid_.interval_contacts[k - 1];
                const int sub = 10;
                const double t0 = grid_.times[k - 1], h = (grid_.times[k] - t0) / sub;
                try {
                    for (int i = 0; i < sub; ++i) {
                        const double t = t0 + i * h;
                        const BodyStateVec k1 = dynamics(x, u0, t, c);
                        const BodyStateVec k2 = dynamics(x + 0.5 * h * k1, u0, t + 0.5 * h, c);
                        const BodyStateVec k3 = dynamics(x + 0.5 * h * k2, u0, t + 0.5 * h, c);
                        const BodyStateVec k4 = dynamics(x + h * k3, u0, t + h, c);
                        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    }
                    rollout = x.allFinite();
                } catch (const Error&) {
                    rollout = false;
                }
            }
            d.X.push_back(k == 0 ? initial_ : (rollout ? x : body_state(reference_(grid_.times[k]))));
            d.U.push_back(u0);
        }
        d.t_final = grid_.times.back();
        guess_ = pack(d, layout_).cwiseMax(lower_).cwiseMin(upper_);
    }

    RobotParams params_;
    NodeGrid grid_;
    ReferenceFunction reference_;
    BodyStateVec initial_;
    CollocationOptions opt_;
    DecisionLayout layout_;
    ConstraintSet constraints_;
    VectorXd lower_, upper_, guess_;
    double weight_ = 1.0;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json vec_to_json(const VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline VectorXd vec_from_json(const nlohmann::json& j) {
    VectorXd v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[i].get<double>();
    return v;
}

/// Bounds may be infinite; JSON has no infinity, so they are written as strings.
inline nlohmann::json bound_to_json(const VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) {
        if (std::isinf(v[i]))
            a.push_back(v[i] > 0 ? "inf" : "-inf");
        else
            a.push_back(v[i]);
    }
    return a;
}

inline VectorXd bound_from_json(const nlohmann::json& j) {
    VectorXd v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) {
        if (j[i].is_string())
            v[i] = j[i].get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                    : -std::numeric_limits<double>::infinity();
        else
            v[i] = j[i].get<double>();
    }
    return v;
}

inline nlohmann::json contacts_to_json(const ContactSet& c) {
    nlohmann::json j;
    j["friction"] = c.friction;
    for (Leg l : c.stance_legs())
        j["stance"][std::string(name(l))] = {{"anchor", vec3_to_json(c.anchor(l))},
                                             {"normal", vec3_to_json(c.normal(l))}};
    if (!j.contains("stance")) j["stance"] = nlohmann::json::object();
    return j;
}

inline ContactSet contacts_from_json(const nlohmann::json& j) {
    ContactSet c;
    c.friction = j.at("friction").get<double>();
    for (const auto& [leg_name, v] : j.at("stance").items())
        c.set_stance(leg_from_name(leg_name), vec3_from_json(v.at("anchor"), "anchor"),
                     vec3_from_json(v.at("normal"), "normal"));
    return c;
}

inline nlohmann::json reference_to_json(double t, const BodyReference& r) {
    return {{"t", t}, {"pose", vec_to_json(r.pose)}, {"rate", vec_to_json(r.rate)}, {"accel", vec_to_json(r.accel)}};
}

}  // namespace detail

inline nlohmann::json to_json(const CollocationOptions& o) {
    return {{"nodes", o.nodes},
            {"n_min", o.n_min},
            {"f_max", o.f_max},
            {"m_max", o.m_max},
            {"cone", o.cone == ConeModel::Exact ? "exact" : "pyramid"},
            {"cone_margin", o.cone_margin},
            {"normal_margin", o.normal_margin},
            {"terminal_condition", o.terminal_condition},
            {"free_final_time", o.free_final_time},
            {"defect_tolerance", o.defect_tolerance},
            {"constraint_tolerance", o.constraint_tolerance},
            {"weights", {{"w1", detail::vec3_to_json(o.weights.w1)}, {"w2", detail::vec3_to_json(o.weights.w2)}}},
            {"gains", {{"kp", o.gains.kp}, {"kd", o.gains.kd}}},
            {"sagittal", o.model.sagittal},
            {"baumgarte_alpha", o.model.baumgarte_alpha}};
}

inline CollocationOptions collocation_options_from_json(const nlohmann::json& j, CollocationOptions o = {}) {
    if (!j.is_object()) throw ConfigError("collocation", "expected an object");
    auto num = [&](const char* key, double& v) {
        if (j.contains(key)) v = detail::number_from_json(j[key], std::string("collocation.") + key);
    };
    if (j.contains("nodes")) {
        if (!j["nodes"].is_number_integer()) throw ConfigError("collocation.nodes", "expected an integer");
        o.nodes = j["nodes"].get<int>();
    }
    num("n_min", o.n_min);
    num("f_max", o.f_max);
    num("m_max", o.m_max);
    num("cone_margin", o.cone_margin);
    num("normal_margin", o.normal_margin);
    num("defect_tolerance", o.defect_tolerance);
    num("constraint_tolerance", o.constraint_tolerance);
    if (j.contains("cone")) {
        const std::string c = j["cone"].get<std::string>();
        if (c == "exact")
            o.cone = ConeModel::Exact;
        else if (c == "pyramid")
            o.cone = ConeModel::Pyramid;
        else
            throw ConfigError("collocation.cone", "expected \"exact\" or \"pyramid\"");
    }
    if (j.contains("terminal_condition")) o.terminal_condition = j["terminal_condition"].get<bool>();
    if (j.contains("free_final_time")) o.free_final_time = j["free_final_time"].get<bool>();
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        if (w.contains("w1")) o.weights.w1 = detail::vec3_from_json(w["w1"], "collocation.weights.w1");
        if (w.contains("w2")) o.weights.w2 = detail::vec3_from_json(w["w2"], "collocation.weights.w2");
    }
    if (j.contains("gains")) {
        o.gains.kp = j["gains"].value("kp", o.gains.kp);
        o.gains.kd = j["gains"].value("kd", o.gains.kd);
    }
    if (j.contains("sagittal")) o.model.sagittal = j["sagittal"].get<bool>();
    if (j.contains("baumgarte_alpha")) o.model.baumgarte_alpha = j["baumgarte_alpha"].get<double>();
    o.validate();
    return o;
}

inline nlohmann::json CollocationProblem::dump(const VectorXd* y) const {
    nlohmann::json j;
    j["format"] = "wair-collocation-1";
    j["robot"] = to_json(params_);
    j["options"] = to_json(opt_);
    j["times"] = grid_.times;
    nlohmann::json nc = nlohmann::json::array(), ic = nlohmann::json::array();
    for (const auto& c : grid_.node_contacts) nc.push_back(detail::contacts_to_json(c));
    for (const auto& c : grid_.interval_contacts) ic.push_back(detail::contacts_to_json(c));
    j["node_contacts"] = nc;
    j["interval_contacts"] = ic;
    j["initial_state"] = detail::vec_to_json(initial_);
    nlohmann::json refs = nlohmann::json::array();
    for (std::size_t k = 0; k < grid_.times.size(); ++k) {
        refs.push_back(detail::reference_to_json(grid_.times[k], reference_(grid_.times[k])));
        if (k + 1 < grid_.times.size()) {
            const double tm = 0.5 * (grid_.times[k] + grid_.times[k + 1]);
            refs.push_back(detail::reference_to_json(tm, reference_(tm)));
        }
    }
    j["reference"] = refs;
    j["guess"] = detail::vec_to_json(guess_);
    j["lower"] = detail::bound_to_json(lower_);
    j["upper"] = detail::bound_to_json(upper_);
    nlohmann::json eqs = nlohmann::json::array(), ineqs = nlohmann::json::array();
    for (const auto& c : constraints_.equalities)
        eqs.push_back({{"kind", to_string(c.kind)}, {"node", c.node}, {"component", c.component}, {"leg", c.leg}});
    for (const auto& c : constraints_.inequalities)
        ineqs.push_back({{"kind", to_string(c.kind)}, {"node", c.node}, {"component", c.component}, {"leg", c.leg}});
    j["equalities"] = eqs;
    j["inequalities"] = ineqs;
    if (y) j["solution"] = detail::vec_to_json(*y);
    return j;
}

inline CollocationProblem CollocationProblem::load(const nlohmann::json& j) {
    if (j.value("format", "") != "wair-collocation-1")
        throw ConfigError("format", "not a collocation problem dump");
    NodeGrid g;
    g.times = j.at("times").get<std::vector<double>>();
    for (const auto& c : j.at("node_contacts")) g.node_contacts.push_back(detail::contacts_from_json(c));
    for (const auto& c : j.at("interval_contacts")) g.interval_contacts.push_back(detail::contacts_from_json(c));
    std::vector<std::pair<double, BodyReference>> samples;
    for (const auto& r : j.at("reference")) {
        BodyReference b;
        b.pose = detail::vec_from_json(r.at("pose"));
        b.rate = detail::vec_from_json(r.at("rate"));
        b.accel = detail::vec_from_json(r.at("accel"));
        samples.emplace_back(r.at("t").get<double>(), b);
    }
    ReferenceFunction ref = [samples](double t) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < samples.size(); ++i)
            if (std::abs(samples[i].first - t) < std::abs(samples[best].first - t)) best = i;
        return samples[best].second;
    };
    const BodyStateVec x0 = detail::vec_from_json(j.at("initial_state"));
    return CollocationProblem(robot_params_from_json(j.at("robot")), std::move(g), std::move(ref), x0,
                              collocation_options_from_json(j.at("options")));
}

/// Torso standing still at `height` over flat ground on the diagonal pair
/// FR + HL, feet below the hips, over [0, duration].
inline CollocationProblem standing_problem(const RobotParams& p, int nodes, double duration = 0.5,
                                           double height = 0.32, CollocationOptions opt = {}) {
    BodyReference ref;
    ref.pose[2] = height;
    ContactSet c;
    for (Leg leg : {Leg::FR, Leg::HL}) {
        const Vec3 hip = ref.pose.head<3>() + p.hip(leg);
        c.set_stance(leg, Vec3(hip.x(), hip.y(), 0.0));
    }
    opt.nodes = nodes;
    return CollocationProblem(p, NodeGrid::uniform(0.0, duration, nodes, c), [ref](double) { return ref; },
                              body_state(ref), opt);
}

}  // namespace wair

#endif  // WAIR_COLLOCATION_HPP
