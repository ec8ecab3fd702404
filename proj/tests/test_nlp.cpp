#include <gtest/gtest.h>

#include <sstream>

#include "wair/nlp.hpp"

using namespace wair;

namespace {

NlpProblem unconstrained(int n, std::function<double(const VectorXd&)> f) {
    NlpProblem p;
    p.n = n;
    p.lower = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    p.upper = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    p.x0 = VectorXd::Zero(n);
    p.objective = std::move(f);
    return p;
}

NlpProblem rosenbrock() {
    NlpProblem p = unconstrained(2, [](const VectorXd& y) {
        return (1.0 - y[0]) * (1.0 - y[0]) + 100.0 * (y[1] - y[0] * y[0]) * (y[1] - y[0] * y[0]);
    });
    p.objective_gradient = [](const VectorXd& y) {
        VectorXd g(2);
        g[0] = -2.0 * (1.0 - y[0]) - 400.0 * y[0] * (y[1] - y[0] * y[0]);
        g[1] = 200.0 * (y[1] - y[0] * y[0]);
        return g;
    };
    p.mode = GradientMode::Analytic;
    p.x0 = Eigen::Vector2d(-1.2, 1.0);
    return p;
}

TEST(Solver, ProjectionOntoEquality) {
    NlpProblem p = unconstrained(4, [](const VectorXd& y) { return 0.5 * y.squaredNorm(); });
    p.x0 << 0.3, -0.2, 0.5, 1.0;
    p.n_eq = 1;
    p.constraints = [](const VectorXd& y, VectorXd& c, VectorXd&) { c[0] = y[0] - 1.0; };
    const SolveResult r = solve(p);
    EXPECT_EQ(r.report.status, SolveStatus::Converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
    EXPECT_LT(r.x.tail<3>().norm(), 1e-6);
    EXPECT_NEAR(r.report.objective, 0.5, 1e-6);
}

TEST(Solver, ActiveInequality) {
    NlpProblem p = unconstrained(1, [](const VectorXd& y) { return (y[0] - 2.0) * (y[0] - 2.0); });
    p.n_ineq = 1;
    p.constraints = [](const VectorXd& y, VectorXd&, VectorXd& g) { g[0] = 1.0 - y[0]; };
    const SolveResult r = solve(p);
    EXPECT_EQ(r.report.status, SolveStatus::Converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
}

TEST(Solver, ActiveBound) {
    NlpProblem p = unconstrained(1, [](const VectorXd& y) { return (y[0] - 2.0) * (y[0] - 2.0); });
    p.upper[0] = 1.0;
    const SolveResult r = solve(p);
    EXPECT_EQ(r.report.status, SolveStatus::Converged);
    EXPECT_EQ(r.x[0], 1.0);
}

TEST(Solver, Rosenbrock) {
    SolverOptions opt;
    opt.optimality_tolerance = 1e-10;
    opt.max_inner = 2000;
    const SolveResult r = solve(rosenbrock(), opt);
    EXPECT_EQ(r.report.status, SolveStatus::Converged);
    EXPECT_LT((r.x - Eigen::Vector2d(1.0, 1.0)).norm(), 1e-5);
}

TEST(Solver, RosenbrockWithFiniteDifferences) {
    NlpProblem p = rosenbrock();
    p.mode = GradientMode::FiniteDifference;
    SolverOptions opt;
    opt.optimality_tolerance = 1e-8;
    opt.max_inner = 2000;
    const SolveResult r = solve(p, opt);
    EXPECT_LT((r.x - Eigen::Vector2d(1.0, 1.0)).norm(), 1e-5);
}

TEST(Solver, InfeasibleStartIsReportedNotThrown) {
    // y0 = 1 and y0 = -1 cannot both hold.
    NlpProblem p = unconstrained(2, [](const VectorXd& y) { return y.squaredNorm(); });
    p.n_eq = 2;
    p.constraints = [](const VectorXd& y, VectorXd& c, VectorXd&) {
        c[0] = y[0] - 1.0;
        c[1] = y[0] + 1.0;
    };
    SolverOptions opt;
    opt.max_outer = 30;
    SolveResult r;
    EXPECT_NO_THROW(r = solve(p, opt));
    EXPECT_NE(r.report.status, SolveStatus::Converged);
    EXPECT_GT(r.report.max_violation, 0.5);
}

TEST(Solver, ReportedViolationIsHonest) {
    NlpProblem p = unconstrained(3, [](const VectorXd& y) { return y.squaredNorm(); });
    p.n_eq = 1;
    p.n_ineq = 2;
    p.constraints = [](const VectorXd& y, VectorXd& c, VectorXd& g) {
        c[0] = y[0] + y[1] + y[2] - 3.0;
        g[0] = y[0] - 1.5;
        g[1] = 2.0 - y[1] * y[1];
    };
    const SolveResult r = solve(p);
    ASSERT_EQ(r.report.status, SolveStatus::Converged);
    EXPECT_LE(r.report.max_violation, 1e-6);
    EXPECT_NEAR(r.report.max_violation, max_violation(p, r.x), 1e-12);
    EXPECT_NEAR(r.x[0], 1.5, 1e-5);
}

TEST(Solver, DeterministicIterates) {
    NlpProblem p = rosenbrock();
    p.n_ineq = 1;
    p.constraints = [](const VectorXd& y, VectorXd&, VectorXd& g) { g[0] = 0.8 - y[0]; };
    SolverOptions opt;
    opt.seed = 7;
    opt.jitter = 0.05;
    std::ostringstream a, b;
    opt.log = &a;
    const SolveResult r1 = solve(p, opt);
    opt.log = &b;
    const SolveResult r2 = solve(p, opt);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_TRUE(r1.x == r2.x);
    EXPECT_FALSE(a.str().empty());
}

TEST(Solver, IterationLogIsJsonLines) {
    NlpProblem p = rosenbrock();
    p.n_eq = 1;
    p.constraints = [](const VectorXd& y, VectorXd& c, VectorXd&) { c[0] = y[0] - 0.5; };
    std::ostringstream log;
    SolverOptions opt;
    opt.log = &log;
    solve(p, opt);
    std::istringstream in(log.str());
    std::string line;
    int count = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* key : {"iteration", "objective", "violation", "step_norm"}) EXPECT_TRUE(j.contains(key));
        ++count;
    }
    EXPECT_GT(count, 0);
}

TEST(GradientCheck, QuadraticPasses) {
    NlpProblem p = unconstrained(3, [](const VectorXd& y) { return y.dot(Eigen::Vector3d(1, 2, 3).asDiagonal() * y); });
    p.objective_gradient = [](const VectorXd& y) { return VectorXd(2.0 * Eigen::Vector3d(1, 2, 3).asDiagonal() * y); };
    EXPECT_LT(check_gradients(p, Eigen::Vector3d(0.3, -0.7, 1.1), 1e-5), 1e-8);
}

TEST(GradientCheck, CorruptedGradientFlagged) {
    NlpProblem p = unconstrained(3, [](const VectorXd& y) { return y.dot(Eigen::Vector3d(1, 2, 3).asDiagonal() * y); });
    p.objective_gradient = [](const VectorXd& y) { return VectorXd(4.0 * Eigen::Vector3d(1, 2, 3).asDiagonal() * y); };
    EXPECT_NEAR(check_gradients(p, Eigen::Vector3d(0.3, -0.7, 1.1), 1e-5), 1.0, 1e-6);
}

TEST(GradientCheck, ConstraintJacobianChecked) {
    NlpProblem p = unconstrained(2, [](const VectorXd& y) { return y.squaredNorm(); });
    p.n_eq = 1;
    p.constraints = [](const VectorXd& y, VectorXd& c, VectorXd&) { c[0] = std::sin(y[0]) * y[1]; };
    p.constraint_jacobian = [](const VectorXd& y) {
        MatrixXd j(1, 2);
        j << std::cos(y[0]) * y[1], std::sin(y[0]);
        return j;
    };
    EXPECT_LT(check_gradients(p, Eigen::Vector2d(0.4, 1.3), 1e-5), 1e-8);
}

TEST(FiniteDifference, ColoredJacobianMatchesDense) {
    // Banded constraints: c_i depends on y_i and y_{i+1}.
    const int n = 12;
    NlpProblem p = unconstrained(n, [](const VectorXd& y) { return y.squaredNorm(); });
    p.n_eq = n - 1;
    p.constraints = [n](const VectorXd& y, VectorXd& c, VectorXd&) {
        for (int i = 0; i + 1 < n; ++i) c[i] = std::sin(y[i]) * y[i + 1] + y[i] * y[i];
    };
    p.sparsity.resize(n);
    for (int j = 0; j < n; ++j) {
        if (j > 0) p.sparsity[j].push_back(j - 1);
        if (j + 1 < n) p.sparsity[j].push_back(j);
    }
    VectorXd y = VectorXd::LinSpaced(n, -1.0, 2.0);
    const MatrixXd colored = constraint_jacobian(p, y, 1e-6);
    NlpProblem dense = p;
    dense.sparsity.clear();
    const MatrixXd full = constraint_jacobian(dense, y, 1e-6);
    EXPECT_LT((colored - full).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FiniteDifference, RichardsonRatioOfCentralDifferences) {
    auto f = [](double x) { return std::exp(std::sin(3.0 * x)); };
    auto estimate = [&](double h) {
        VectorXd d(1);
        d[0] = (f(0.4 + h) - f(0.4 - h)) / (2.0 * h);
        return d;
    };
    EXPECT_NEAR(richardson_ratio(estimate, 0.05), 4.0, 0.1);
}

}  // namespace
