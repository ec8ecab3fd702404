#include <gtest/gtest.h>

#include <chrono>
#include <numbers>

#include "test_support.hpp"
#include "wair/collocation.hpp"

using namespace wair;
using wair::testing::Rng;

namespace {

VectorXd random_vector(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

TEST(Interpolation, ControlIsLinear) {
    const VectorXd a = Eigen::Vector3d(1, 2, 3), b = Eigen::Vector3d(-1, 0, 5);
    EXPECT_TRUE(interpolate_control(a, b, 0.2, 0.7, 0.2) == a);
    EXPECT_TRUE(interpolate_control(a, b, 0.2, 0.7, 0.7) == b);
    EXPECT_LT((interpolate_control(a, b, 0.2, 0.7, 0.45) - 0.5 * (a + b)).norm(), 1e-15);
    for (double t : {0.2, 0.33, 0.5, 0.7}) EXPECT_LT((interpolate_control(a, a, 0.2, 0.7, t) - a).norm(), 1e-15);
}

TEST(Interpolation, HermiteEndpointContracts) {
    Rng rng(51);
    for (int i = 0; i < 1000; ++i) {
        const VectorXd xj = random_vector(rng, 12), xj1 = random_vector(rng, 12);
        const VectorXd fj = random_vector(rng, 12), fj1 = random_vector(rng, 12);
        const double tj = rng.uniform(-1, 1), h = rng.uniform(0.01, 1.0);
        const HermiteCubic c = hermite_cubic(xj, xj1, fj, fj1, tj, tj + h);
        EXPECT_LT((c.value(tj) - xj).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((c.value(tj + h) - xj1).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((c.derivative(tj) - fj).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((c.derivative(tj + h) - fj1).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Interpolation, HermiteHandExample) {
    VectorXd zero = VectorXd::Zero(1), one = VectorXd::Ones(1);
    const HermiteCubic c = hermite_cubic(zero, one, zero, zero, 0.0, 1.0);
    EXPECT_NEAR(c.value(0.5)[0], 0.5, 1e-15);
    EXPECT_NEAR(c.derivative(0.5)[0], 1.5, 1e-15);
    EXPECT_NEAR(interpolate_state(zero, one, zero, zero, 0.0, 1.0, 0.5)[0], 0.5, 1e-15);
}

TEST(Interpolation, LinearFlowReproduced) {
    Rng rng(52);
    const VectorXd a = random_vector(rng, 4), b = random_vector(rng, 4);
    const double t0 = 0.3, t1 = 0.8;
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(t0, t1);
        const VectorXd x = interpolate_state(a + t0 * b, a + t1 * b, b, b, t0, t1, t);
        EXPECT_LT((x - (a + t * b)).norm(), 1e-14);
    }
}

// Point mass under gravity: x = (p, v), f = (v, g).
VectorXd ballistic_f(const VectorXd& x, const VectorXd&, double) {
    VectorXd f(6);
    f << x.tail<3>(), Vec3(0, 0, -9.81);
    return f;
}

VectorXd ballistic_exact(double t) {
    const Vec3 p0(0.1, -0.2, 1.0), v0(0.5, 0.3, 2.0), g(0, 0, -9.81);
    VectorXd x(6);
    x << p0 + v0 * t + 0.5 * g * t * t, v0 + g * t;
    return x;
}

TEST(Defect, BallisticIsExact) {
    const VectorXd u = VectorXd::Zero(6);
    const VectorXd d = collocation_defect(ballistic_exact(0.2), ballistic_exact(0.25), u, u, ballistic_f, 0.2, 0.25);
    EXPECT_LT(d.norm(), 1e-10);
}

TEST(Defect, PerturbationSlope) {
    const VectorXd u = VectorXd::Zero(6);
    const double h = 0.05, delta = 1e-4;
    const VectorXd x0 = ballistic_exact(0.0), x1 = ballistic_exact(h);
    VectorXd x1p = x1;
    x1p[0] += delta;  // position only: f does not depend on it
    const VectorXd d0 = collocation_defect(x0, x1, u, u, ballistic_f, 0.0, h);
    const VectorXd d1 = collocation_defect(x0, x1p, u, u, ballistic_f, 0.0, h);
    EXPECT_NEAR(d1[0] - d0[0], 1.5 / h * delta, 1e-10);
}

TEST(Defect, Equilibrium) {
    const VectorXd x = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
    const VectorXd u = VectorXd::Zero(2);
    auto still = [](const VectorXd& s, const VectorXd&, double) { return VectorXd(VectorXd::Zero(s.size())); };
    EXPECT_EQ(collocation_defect(x, x, u, u, still, 0.0, 0.1).norm(), 0.0);
}

TEST(Defect, FourthOrderConvergenceOnTumblingBody) {
    // Free torso spinning about all axes: translational rows are polynomial,
    // rotational rows are not, so the defect exposes the scheme's order.
    const RobotParams p;
    ModelOptions opt;
    auto f = [&](const VectorXd& x, const VectorXd& u, double) -> VectorXd {
        const BodyStateVec xb = x;
        const BodySolution s = body_dynamics(xb, p, {}, ThrustWrench::from_vector(u), Vec6::Zero(), opt);
        BodyStateVec xd;
        xd << xb.tail<6>(), s.accel;
        return xd;
    };
    BodyStateVec x0;
    x0 << 0, 0, 2, 0.2, -0.3, 0.1, 0.4, 0, 1, 2.0, -1.5, 3.0;
    const VectorXd u = VectorXd::Zero(6);
    // Reference trajectory from fine RK4.
    const double dt = 5e-5;
    std::vector<BodyStateVec> fine{x0};
    for (int k = 0; k < 8000; ++k) {
        const BodyStateVec& x = fine.back();
        const BodyStateVec k1 = f(x, u, 0), k2 = f(x + 0.5 * dt * k1, u, 0), k3 = f(x + 0.5 * dt * k2, u, 0),
                           k4 = f(x + dt * k3, u, 0);
        fine.push_back(x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
    }
    std::vector<double> hs, ds;
    for (int steps : {400, 200, 100, 50}) {
        const double h = steps * dt;
        double worst = 0.0;
        for (int j = 0; j + steps <= 8000; j += steps)
            worst = std::max(worst, collocation_defect(fine[j], fine[j + steps], u, u, f, j * dt, (j + steps) * dt)
                                        .cwiseAbs()
                                        .maxCoeff());
        hs.push_back(std::log(h));
        ds.push_back(std::log(worst));
    }
    // Least-squares slope of log(defect) against log(h).
    const double n = static_cast<double>(hs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) sx += hs[i], sy += ds[i], sxx += hs[i] * hs[i], sxy += hs[i] * ds[i];
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_GE(slope, 3.5);
    EXPECT_LE(slope, 4.5);
}

TEST(FrictionCone, PureNormalLoad) {
    ContactSet c;
    c.set_stance(Leg::FR, Vec3::Zero());
    GroundReaction g;
    g.legs = {Leg::FR};
    g.forces = {Vec3(0, 0, 100)};
    const VectorXd v = friction_cone_constraints(g, c, 5.0);
    EXPECT_NEAR(v[0], 95.0, 1e-12);
    EXPECT_NEAR(v[1], 35.0, 1e-12);
}

TEST(FrictionCone, TangentialOverload) {
    ContactSet c;
    c.set_stance(Leg::FR, Vec3::Zero());
    GroundReaction g;
    g.legs = {Leg::FR};
    g.forces = {Vec3(40, 0, 100)};
    EXPECT_NEAR(friction_cone_constraints(g, c, 5.0)[1], -5.0, 1e-12);
}

TEST(FrictionCone, VerticalForceOnThirtyDegreeIncline) {
    const double a = std::numbers::pi / 6.0;
    ContactSet c;
    c.set_stance(Leg::FR, Vec3::Zero(), Vec3(-std::sin(a), 0, std::cos(a)));
    GroundReaction g;
    g.legs = {Leg::FR};
    g.forces = {Vec3(0, 0, 100)};
    const VectorXd v = friction_cone_constraints(g, c, 0.0);
    EXPECT_NEAR(v[0], 86.6025403784, 1e-9);
    EXPECT_NEAR(friction_ratio(g.forces[0], c.normal(Leg::FR)), std::tan(a), 1e-12);
    EXPECT_LT(v[1], 0.0);
}

TEST(FrictionCone, EmptyContactSetThrows) {
    EXPECT_THROW(friction_cone_constraints(GroundReaction{}, ContactSet{}, 5.0), NoStanceFeet);
}

TEST(FrictionCone, PyramidContainment) {
    Rng rng(53);
    const double mu = 0.35;
    for (int i = 0; i < 5000; ++i) {
        const Vec3 n = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0).normalized();
        ContactSet c;
        c.friction = mu;
        c.set_stance(Leg::HL, Vec3::Zero(), n);
        GroundReaction g;
        g.legs = {Leg::HL};
        g.forces = {rng.vec3(-60, 60) + 80.0 * n};
        const bool exact = friction_cone_constraints(g, c, 0.0, ConeModel::Exact).minCoeff() >= 0.0;
        const bool pyramid = friction_cone_constraints(g, c, 0.0, ConeModel::Pyramid).minCoeff() >= 0.0;
        if (exact) {
            EXPECT_TRUE(pyramid);
        }
        if (pyramid) {
            EXPECT_LE(friction_ratio(g.forces[0], n), mu * std::sqrt(2.0) + 1e-12);
        }
    }
}

TEST(Cost, Examples) {
    CostWeights w;
    const std::vector<double> t{0.0, 1.0};
    EXPECT_EQ(cost({Vec6::Zero(), Vec6::Zero()}, w, t), 0.0);
    w.w1 = Vec3(2, 2, 2);
    Vec6 u = Vec6::Zero();
    u[0] = 1.0;
    EXPECT_NEAR(cost({u, u}, w, t), 1.0, 1e-15);
    Rng rng(54);
    std::vector<Vec6> us;
    for (int i = 0; i < 5; ++i) us.push_back(random_vector(rng, 6));
    std::vector<Vec6> doubled = us;
    for (auto& v : doubled) v *= 2.0;
    const std::vector<double> t5{0, 0.1, 0.3, 0.35, 0.6};
    EXPECT_NEAR(cost(doubled, w, t5), 4.0 * cost(us, w, t5), 1e-12);
    EXPECT_THROW((CostWeights{Vec3(1, 0, 1), Vec3::Ones()}.validate()), ConfigError);
}

TEST(Transcription, PackUnpackRoundTrip) {
    Rng rng(55);
    for (bool free_tf : {false, true}) {
        DecisionLayout l{7, free_tf};
        const VectorXd y = random_vector(rng, l.size());
        const Decision d = unpack(y, l);
        EXPECT_TRUE(pack(d, l) == y);
        EXPECT_EQ(l.size(), 7 * 12 + 7 * 6 + (free_tf ? 1 : 0));
    }
}

TEST(Transcription, ConstraintCounts) {
    const RobotParams p;
    for (ConeModel cone : {ConeModel::Exact, ConeModel::Pyramid}) {
        CollocationOptions opt;
        opt.cone = cone;
        opt.terminal_condition = true;
        const CollocationProblem prob = standing_problem(p, 5, 0.5, 0.32, opt);
        const int cone_rows = cone == ConeModel::Exact ? 1 : 4;
        EXPECT_EQ(prob.constraint_set().equalities.size(), static_cast<std::size_t>(12 + 4 * 12 + 12));
        EXPECT_EQ(prob.constraint_set().inequalities.size(), static_cast<std::size_t>(5 * 2 * (1 + cone_rows + 2)));
        VectorXd c, g;
        prob.evaluate(prob.initial_guess(), c, g);
        EXPECT_EQ(c.size(), static_cast<int>(prob.constraint_set().equalities.size()));
        EXPECT_EQ(g.size(), static_cast<int>(prob.constraint_set().inequalities.size()));
    }
}

TEST(Transcription, GridMustAlignWithContactSwitches) {
    const GaitSchedule gait(0.5, 2.0);
    auto contacts = [](std::size_t) { return ContactSet{}; };
    EXPECT_NO_THROW(make_node_grid(0.0, 1.0, 11, gait, contacts));
    EXPECT_THROW(make_node_grid(0.0, 1.0, 10, gait, contacts), GridMisaligned);
    EXPECT_NO_THROW(make_node_grid(0.5, 1.0, 4, gait, contacts));
}

TEST(Transcription, ObjectiveGradientIsExact) {
    const RobotParams p;
    const CollocationProblem prob = standing_problem(p, 5);
    Rng rng(56);
    const VectorXd y = prob.initial_guess() + 5.0 * random_vector(rng, prob.layout().size());
    EXPECT_LT(check_gradients(prob.nlp(), y, 1e-4), 1e-7);
}

TEST(Transcription, DumpLoadRoundTrip) {
    const RobotParams p;
    CollocationOptions opt;
    opt.model.sagittal = true;
    const CollocationProblem prob = standing_problem(p, 5, 0.5, 0.32, opt);
    const nlohmann::json j = prob.dump();
    const CollocationProblem back = CollocationProblem::load(nlohmann::json::parse(j.dump()));
    Rng rng(57);
    VectorXd y = prob.initial_guess() + 0.01 * random_vector(rng, prob.layout().size());
    VectorXd c1, g1, c2, g2;
    prob.evaluate(y, c1, g1);
    back.evaluate(y, c2, g2);
    EXPECT_LT((c1 - c2).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((g1 - g2).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(back.lower() == prob.lower());
    EXPECT_TRUE(back.upper() == prob.upper());
}

TEST(Transcription, FlatStandingNeedsNoThrust) {
    const RobotParams p;
    for (bool sagittal : {true, false}) {
        CollocationOptions opt;
        opt.model.sagittal = sagittal;
        const CollocationProblem prob = standing_problem(p, 5, 0.5, 0.32, opt);
        const auto start = std::chrono::steady_clock::now();
        const SolveResult r = solve(prob.nlp());
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        EXPECT_EQ(r.report.status, SolveStatus::Converged);
        EXPECT_LT(r.report.iterations, 200);
        EXPECT_LT(seconds, 30.0);
        for (int k = 0; k < prob.layout().nodes; ++k) {
            const NodeSolution n = prob.node_solution(r.x, k);
            EXPECT_LT(n.u.head<3>().norm(), 1e-3);
            double normal = 0.0;
            for (std::size_t i = 0; i < n.body.grf.legs.size(); ++i)
                normal += n.body.grf.forces[i].dot(prob.grid().node_contacts[k].normal(n.body.grf.legs[i]));
            EXPECT_NEAR(normal, p.body_mass * 9.81, 1e-6);
        }
    }
}

TEST(Transcription, ReportedFeasibilityHoldsOnReevaluation) {
    const RobotParams p;
    const CollocationProblem prob = standing_problem(p, 5);
    const SolveResult r = solve(prob.nlp());
    ASSERT_EQ(r.report.status, SolveStatus::Converged);
    VectorXd c, g;
    prob.evaluate(r.x, c, g);
    EXPECT_LE(c.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_GE(g.minCoeff(), -1e-6);
}

}  // namespace
