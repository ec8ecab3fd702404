// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "test_support.hpp"
#include "wair/wair.hpp"

using namespace wair;
using wair::testing::Rng;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kEnergyDrift = 1e-6;
constexpr double kEnergySeconds = 1.0;
constexpr double kSymmetry = 1e-12;
constexpr double kJacobianRel = 1e-5;
constexpr double kKkt = 1e-8;
constexpr double kHermite = 1e-12;
constexpr double kOrderLo = 3.5, kOrderHi = 4.5;
constexpr double kStandThrust = 1e-3;
constexpr double kStandWeight = 1e-6;
constexpr double kStandSeconds = 30.0;
constexpr double kConeSlack = 1e-3;
constexpr double kMeanForward = 1.0;  // N
constexpr double kSlopeSeconds = 600.0;
constexpr double kRosenbrock = 1e-5;

// Verdict lines are collected and printed in criterion order at the end;
// diagnostics print as they are produced.
std::map<int, std::string> verdicts;
int failures = 0;

void verdict(int id, const char* name, bool ok, const std::string& detail) {
    verdicts[id] = std::string(ok ? "PASS" : "FAIL") + " " + std::to_string(id) + " " + name + ": " + detail;
    std::printf("  [%d done]\n", id);
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, a...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void energy() {
    const RobotParams p;
    HromState s;
    s.position = Vec3(0.0, 0.0, 2.0);
    s.velocity = Vec3(0.5, -0.2, 3.0);
    s.euler = {0.1, 0.2, -0.3};
    s.euler_rate = Vec3(0.8, -0.6, 1.1);
    const double e0 = total_energy(s, p);
    const auto t0 = std::chrono::steady_clock::now();
    StateVec x = s.to_vector();
    auto f = [&](const StateVec& xs) {
        return state_derivative(HromState::from_vector(xs), p, ContactSet{}, ControlInput{}).xdot;
    };
    double worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
        x = rk4_step(x, 1e-3, f);
        worst = std::max(worst, std::abs(total_energy(HromState::from_vector(x), p) - e0) / std::abs(e0));
    }
    const double secs = seconds_since(t0);
    verdict(1, "energy conservation", worst < kEnergyDrift && secs < kEnergySeconds,
            fmt("relative drift %.2e over 2 s, %.3f s", worst, secs));
}

void dynamics_oracles() {
    Rng rng(2024);
    const RobotParams p;
    double asym = 0.0, min_eig = std::numeric_limits<double>::infinity(), jac = 0.0, jdot = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const HromState s = rng.state(p);
        const GenMat m = mass_matrix(s, p);
        asym = std::max(asym, (m - m.transpose()).cwiseAbs().maxCoeff());
        const Mat6 mb = m.topLeftCorner<6, 6>();
        min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat6>(mb).eigenvalues().minCoeff());
        for (Leg leg : kAllLegs) {
            auto pos = [&](double t) { return foot_position(wair::testing::advance_coordinates(s, t), p, leg); };
            jac = std::max(jac, wair::testing::relative_error(foot_jacobian(s, p, leg) * s.velocities(),
                                                              wair::testing::central_difference(pos, 0.0, 1e-6), 1e-3));
            auto jv = [&](double t) {
                return (foot_jacobian(wair::testing::advance_coordinates(s, t), p, leg) * s.velocities()).eval();
            };
            jdot = std::max(jdot, wair::testing::relative_error(foot_jdot_v(s, p, leg),
                                                                wair::testing::central_difference(jv, 0.0, 1e-6), 1e-2));
        }
    }
    verdict(2, "dynamics oracles", asym < kSymmetry && min_eig > 0.0 && jac < kJacobianRel && jdot < kJacobianRel,
            fmt("|M-M'| %.1e, min eig %.3g, J rel %.1e, Jdot v rel %.1e", asym, min_eig, jac, jdot));
}

void hermite() {
    Rng rng(4);
    double worst = 0.0;
    auto vec = [&](int n) {
        VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = rng.uniform(-5, 5);
        return v;
    };
    for (int i = 0; i < 1000; ++i) {
        const VectorXd xj = vec(12), xj1 = vec(12), fj = vec(12), fj1 = vec(12);
        const double tj = rng.uniform(-1, 1), h = rng.uniform(0.01, 1.0);
        const HermiteCubic c = hermite_cubic(xj, xj1, fj, fj1, tj, tj + h);
        worst = std::max({worst, (c.value(tj) - xj).cwiseAbs().maxCoeff(), (c.value(tj + h) - xj1).cwiseAbs().maxCoeff(),
                          (c.derivative(tj) - fj).cwiseAbs().maxCoeff(),
                          (c.derivative(tj + h) - fj1).cwiseAbs().maxCoeff()});
    }

    // Defect order on a tumbling free torso, against a fine RK4 trajectory.
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
    const double dt = 5e-5;
    std::vector<BodyStateVec> fine{x0};
    for (int k = 0; k < 8000; ++k) {
        const BodyStateVec& x = fine.back();
        const BodyStateVec k1 = f(x, u, 0), k2 = f(x + 0.5 * dt * k1, u, 0), k3 = f(x + 0.5 * dt * k2, u, 0),
                           k4 = f(x + dt * k3, u, 0);
        fine.push_back(x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
    }
    std::vector<double> lh, ld;
    for (int steps : {400, 200, 100, 50}) {
        double d = 0.0;
        for (int j = 0; j + steps <= 8000; j += steps) {
            d = std::max(d, collocation_defect(fine[j], fine[j + steps], u, u, f, j * dt, (j + steps) * dt)
                                .cwiseAbs()
                                .maxCoeff());
        }
        lh.push_back(std::log(steps * dt));
        ld.push_back(std::log(d));
    }
    const double n = static_cast<double>(lh.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lh.size(); ++i) {
        sx += lh[i];
        sy += ld[i];
        sxx += lh[i] * lh[i];
        sxy += lh[i] * ld[i];
    }
    const double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    verdict(4, "Hermite interpolant", worst < kHermite && order >= kOrderLo && order <= kOrderHi,
            fmt("endpoint error %.1e, defect order %.3f", worst, order));
}

struct StandResult {
    bool ok = false;
    SolveReport report;
    double honesty_gap = 0.0;
};

StandResult static_stand() {
    const RobotParams p;
    const CollocationProblem prob = standing_problem(p, 5);
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult r = solve(prob.nlp());
    const double secs = seconds_since(t0);
    double thrust = 0.0, weight_err = 0.0;
    for (int k = 0; k < prob.layout().nodes; ++k) {
        const NodeSolution ns = prob.node_solution(r.x, k);
        thrust = std::max(thrust, ns.u.head<3>().norm());
        double normal = 0.0;
        for (std::size_t i = 0; i < ns.body.grf.legs.size(); ++i)
            normal += ns.body.grf.forces[i].dot(prob.grid().node_contacts[k].normal(ns.body.grf.legs[i]));
        weight_err = std::max(weight_err, std::abs(normal - p.body_mass * 9.81));
    }
    StandResult out;
    out.ok = r.report.status == SolveStatus::Converged && thrust < kStandThrust && weight_err < kStandWeight &&
             secs < kStandSeconds;
    out.report = r.report;
    out.honesty_gap = std::abs(r.report.max_violation - max_violation(prob.nlp(), r.x));
    verdict(5, "static stand", out.ok,
            fmt("%s, max |f| %.2e N, |sum normal - mg| %.2e N, %.2f s", to_string(r.report.status), thrust, weight_err,
                secs));
    return out;
}

struct SlopeStats {
    double min_normal = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    Vec3 mean_force = Vec3::Zero();
    double flat_thrust = 0.0;
};

SlopeStats slope_stats(const Trajectory& tr) {
    SlopeStats st;
    int n = 0;
    for (const auto& s : tr.samples) {
        if (tr.in_slope_phase(s.t)) {
            for (const auto& f : s.feet) {
                if (!f.stance) continue;
                st.min_normal = std::min(st.min_normal, f.normal_force);
                st.max_ratio = std::max(st.max_ratio, f.friction_ratio);
            }
            st.mean_force += s.wrench.head<3>();
            ++n;
        }
        if (tr.in_flat_window(s.t)) st.flat_thrust = std::max(st.flat_thrust, s.wrench.head<3>().norm());
    }
    if (n > 0) st.mean_force /= n;
    return st;
}

struct SlopeRuns {
    bool ran = false;
    Trajectory with, without;
};

SlopeRuns slope_climb() {
    SlopeRuns runs;
    Scenario sc = wair30_scenario();
    const double n_min = sc.collocation.n_min, mu = sc.terrain.segments().back().friction;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        runs.with = run_episode(sc);
    } catch (const std::exception& e) {
        verdict(6, "slope climb", false, std::string("thrust episode failed: ") + e.what());
        return runs;
    }
    const double secs = seconds_since(t0);
    sc.thrust = false;
    try {
        runs.without = run_episode(sc);
    } catch (const std::exception& e) {
        verdict(6, "slope climb", false, std::string("thrust-free episode failed: ") + e.what());
        return runs;
    }
    runs.ran = true;
    const SlopeStats a = slope_stats(runs.with), b = slope_stats(runs.without);
    const bool ok_a = a.min_normal >= n_min && a.max_ratio <= mu + kConeSlack;
    const bool ok_b = b.min_normal <= 0.0 || b.max_ratio > mu;
    const bool ok_c = a.mean_force.x() > kMeanForward && a.flat_thrust < kStandThrust;
    std::printf("  slope starts at %.3f s, flat window ends at %.3f s\n", runs.with.slope_start, runs.with.flat_end);
    std::printf("  (a) thrust:    min normal %.3f N (floor %.1f), max |ft|/fn %.4f (limit %.3f)\n", a.min_normal, n_min,
                a.max_ratio, mu + kConeSlack);
    std::printf("  (b) no thrust: min normal %.3f N, max |ft|/fn %g\n", b.min_normal, b.max_ratio);
    std::printf("  (c) mean slope thrust (body) %.3f %.3f %.3f N, flat max |f| %.2e N\n", a.mean_force.x(),
                a.mean_force.y(), a.mean_force.z(), a.flat_thrust);
    verdict(6, "slope climb", ok_a && ok_b && ok_c && secs < kSlopeSeconds,
            fmt("(a) %s (b) %s (c) %s, thrust episode %.1f s", ok_a ? "ok" : "violated", ok_b ? "ok" : "not shown",
                ok_c ? "ok" : "violated", secs));
    return runs;
}

void kkt(const SlopeRuns& runs) {
    if (!runs.ran) {
        verdict(3, "KKT residual", false, "slope episodes did not complete");
        return;
    }
    const double worst = std::max(runs.with.max_kkt_residual, runs.without.max_kkt_residual);
    verdict(3, "KKT residual", worst < kKkt,
            fmt("max |J vdot + Jdot v| %.2e over %zu + %zu accel calls", worst, runs.with.accel_calls,
                runs.without.accel_calls));
}

void solver_sanity(const StandResult& stand, const SlopeRuns& runs) {
    NlpProblem p;
    p.n = 2;
    p.lower = VectorXd::Constant(2, -std::numeric_limits<double>::infinity());
    p.upper = VectorXd::Constant(2, std::numeric_limits<double>::infinity());
    p.x0 = Eigen::Vector2d(-1.2, 1.0);
    p.objective = [](const VectorXd& y) {
        return (1.0 - y[0]) * (1.0 - y[0]) + 100.0 * (y[1] - y[0] * y[0]) * (y[1] - y[0] * y[0]);
    };
    p.objective_gradient = [](const VectorXd& y) {
        VectorXd g(2);
        g[0] = -2.0 * (1.0 - y[0]) - 400.0 * y[0] * (y[1] - y[0] * y[0]);
        g[1] = 200.0 * (y[1] - y[0] * y[0]);
        return g;
    };
    p.mode = GradientMode::Analytic;
    SolverOptions opt;
    opt.optimality_tolerance = 1e-10;
    opt.max_inner = 2000;
    const SolveResult r = solve(p, opt);
    const double dist = (r.x - Eigen::Vector2d(1.0, 1.0)).norm();

    NlpProblem bad = p;
    bad.objective_gradient = [g = p.objective_gradient](const VectorXd& y) { return VectorXd(2.0 * g(y)); };
    const double flagged = check_gradients(bad, Eigen::Vector2d(0.3, -0.4), 1e-6);
    const double clean = check_gradients(p, Eigen::Vector2d(0.3, -0.4), 1e-6);

    // Every converged report must satisfy its own feasibility claim.
    bool honest = stand.report.status != SolveStatus::Converged ||
                  (stand.report.max_violation <= SolverOptions{}.tolerance && stand.honesty_gap < 1e-12);
    int reports = 1;
    for (const PhaseRecord& ph : runs.with.phases) {
        if (!ph.solved || ph.report.status != SolveStatus::Converged) continue;
        honest = honest && ph.report.max_violation <= SolverOptions{}.tolerance;
        ++reports;
    }
    verdict(7, "solver sanity", dist < kRosenbrock && flagged > 1e-2 && clean < 1e-6 && honest,
            fmt("Rosenbrock |x-1| %.1e, corrupted grad err %.2f vs clean %.1e, %d converged reports %s", dist, flagged,
                clean, reports, honest ? "honest" : "NOT honest"));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void determinism(const std::string& sim, const fs::path& work) {
    if (sim.empty()) {
        verdict(8, "determinism", false, "no simulator path given");
        return;
    }
    const fs::path a = work / "seed7_a", b = work / "seed7_b";
    fs::remove_all(a);
    fs::remove_all(b);
    for (const fs::path& out : {a, b}) {
        const std::string cmd = "\"" + sim + "\" repro wair30 --seed 7 --out \"" + out.string() + "\" > \"" +
                                (out.string() + ".stdout") + "\" 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) {
            verdict(8, "determinism", false, fmt("simulator exited with %d for %s", rc, out.c_str()));
            return;
        }
    }
    int files = 0;
    std::string mismatch;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        ++files;
        if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) mismatch = rel.string();
    }
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) mismatch = e.path().string();
    verdict(8, "determinism", files > 0 && mismatch.empty(),
            mismatch.empty() ? fmt("%d files byte-identical", files) : "differs: " + mismatch);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance run"};
    std::string sim, work = "acceptance_out";
    app.add_option("--sim", sim, "wair_sim executable");
    app.add_option("--work", work, "scratch directory");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    energy();
    dynamics_oracles();
    hermite();
    const StandResult stand = static_stand();
    const SlopeRuns runs = slope_climb();
    kkt(runs);
    solver_sanity(stand, runs);
    determinism(sim, work);
    for (const auto& [id, line] : verdicts) std::printf("%s\n", line.c_str());
    std::printf("%d criteria failed\n", failures);
    return failures;
}
