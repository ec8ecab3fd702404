#ifndef WAIR_NLP_HPP
#define WAIR_NLP_HPP

// Bound-constrained augmented-Lagrangian solver:
//
//   min f(y)  s.t.  c(y) = 0,  g(y) >= 0,  lower <= y <= upper.
//
// Outer loop: Powell-Hestenes-Rockafellar multipliers and penalty updates.
// Inner loop: limited-memory BFGS with projection onto the bound box.
// Constraint Jacobians come from the problem or from colored central
// differences over a declared sparsity pattern.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace wair {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class SolveStatus { Converged, MaxIterations, Infeasible, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::MaxIterations: return "max-iter";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

enum class GradientMode { Analytic, FiniteDifference };

struct NlpProblem {
    int n = 0;
    int n_eq = 0;
    int n_ineq = 0;
    VectorXd lower, upper, x0;

    std::function<double(const VectorXd&)> objective;
    /// Optional analytic objective gradient.
    std::function<VectorXd(const VectorXd&)> objective_gradient;
    /// Fills eq (n_eq) and ineq (n_ineq).
    std::function<void(const VectorXd&, VectorXd& eq, VectorXd& ineq)> constraints;
    /// Optional analytic Jacobian, rows ordered [eq; ineq].
    std::function<MatrixXd(const VectorXd&)> constraint_jacobian;
    /// For finite differences: rows (in [eq; ineq] numbering) touched by each column.
    /// Empty means dense.
    std::vector<std::vector<int>> sparsity;
    GradientMode mode = GradientMode::FiniteDifference;
    /// Optional positive variable scales; the solver iterates on y / scale.
    VectorXd scale;

    void validate() const {
        auto bad = [](const char* what) { throw std::invalid_argument(std::string("NlpProblem: ") + what); };
        if (lower.size() != n || upper.size() != n || x0.size() != n) bad("bound or initial point size mismatch");
        if (!objective) bad("objective missing");
        if ((n_eq + n_ineq) > 0 && !constraints) bad("constraint callable missing");
        if (!sparsity.empty() && static_cast<int>(sparsity.size()) != n) bad("sparsity must have one entry per column");
        for (int i = 0; i < n; ++i)
            if (!(lower[i] <= upper[i])) bad("lower bound above upper bound");
        if (((x0.array() < lower.array()) || (x0.array() > upper.array())).any()) bad("initial point outside bounds");
        if (scale.size() != 0 && (scale.size() != n || !(scale.array() > 0.0).all())) bad("scale must be positive, one per variable");
    }
};

struct SolverOptions {
    int max_outer = 200;
    int max_inner = 1000;
    /// Constraint violation tolerance (infinity norm).
    double tolerance = 1e-6;
    /// Stationarity tolerance on the projected Lagrangian gradient.
    double optimality_tolerance = 1e-6;
    double initial_penalty = 1.0;
    double penalty_growth = 10.0;
    double max_penalty = 1e10;
    double multiplier_bound = 1e6;
    int lbfgs_memory = 10;
    double fd_step = 1e-6;
    /// Uniform jitter applied to the free entries of the initial point (0 disables).
    double jitter = 0.0;
    std::uint64_t seed = 0;
    /// Line-delimited JSON iteration log; null disables.
    std::ostream* log = nullptr;
};

struct SolveReport {
    SolveStatus status = SolveStatus::NumericalFailure;
    double objective = 0.0;
    double max_violation = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    int inner_iterations = 0;
    double wall_time = 0.0;
};

inline nlohmann::json to_json(const SolveReport& r, bool with_time = false) {
    nlohmann::json j{{"status", to_string(r.status)},
                     {"objective", r.objective},
                     {"max_violation", r.max_violation},
                     {"kkt_residual", r.kkt_residual},
                     {"iterations", r.iterations},
                     {"inner_iterations", r.inner_iterations}};
    if (with_time) j["wall_time"] = r.wall_time;
    return j;
}

struct SolveResult {
    VectorXd x;
    SolveReport report;
};

/// Worst violation of c = 0, g >= 0 and the bounds at y, computed from scratch.
inline double max_violation(const NlpProblem& p, const VectorXd& y) {
    double v = 0.0;
    if (p.n_eq + p.n_ineq > 0) {
        VectorXd c(p.n_eq), g(p.n_ineq);
        p.constraints(y, c, g);
        if (p.n_eq) v = std::max(v, c.cwiseAbs().maxCoeff());
        if (p.n_ineq) v = std::max(v, (-g).cwiseMax(0.0).maxCoeff());
    }
    for (int i = 0; i < p.n; ++i) v = std::max({v, p.lower[i] - y[i], y[i] - p.upper[i]});
    return v;
}

namespace detail {

inline VectorXd project(const VectorXd& y, const VectorXd& lo, const VectorXd& hi) {
    return y.cwiseMax(lo).cwiseMin(hi);
}

/// Projected gradient: components that would push past an active bound are dropped.
inline VectorXd projected_gradient(const VectorXd& y, const VectorXd& g, const VectorXd& lo, const VectorXd& hi) {
    return y - project(y - g, lo, hi);
}

/// Greedy distance-2 coloring of Jacobian columns from their row sets.
inline std::vector<std::vector<int>> color_columns(const NlpProblem& p, int rows) {
    std::vector<std::vector<int>> groups;
    std::vector<std::vector<char>> used;  // used[color][row]
    for (int j = 0; j < p.n; ++j) {
        if (p.lower[j] == p.upper[j]) continue;
        if (p.sparsity.empty()) {
            groups.push_back({j});
            continue;
        }
        std::size_t c = 0;
        for (; c < groups.size(); ++c) {
            bool clash = false;
            for (int r : p.sparsity[j])
                if (used[c][r]) {
                    clash = true;
                    break;
                }
            if (!clash) break;
        }
        if (c == groups.size()) {
            groups.emplace_back();
            used.emplace_back(rows, 0);
        }
        groups[c].push_back(j);
        for (int r : p.sparsity[j]) used[c][r] = 1;
    }
    return groups;
}

}  // namespace detail

/// Objective gradient: analytic if provided and selected, else central differences.
inline VectorXd objective_gradient(const NlpProblem& p, const VectorXd& y, double h) {
    if (p.objective_gradient && p.mode == GradientMode::Analytic) return p.objective_gradient(y);
    VectorXd g = VectorXd::Zero(p.n);
    VectorXd z = y;
    for (int j = 0; j < p.n; ++j) {
        if (p.lower[j] == p.upper[j]) continue;
        const double step = h * std::max(1.0, std::abs(y[j]));
        z[j] = y[j] + step;
        const double fp = p.objective(z);
        z[j] = y[j] - step;
        const double fm = p.objective(z);
        z[j] = y[j];
        g[j] = (fp - fm) / (2.0 * step);
    }
    return g;
}

/// Constraint Jacobian [J_eq; J_ineq]: analytic if provided and selected, else
/// colored central differences (columns of fixed variables are left zero).
inline MatrixXd constraint_jacobian(const NlpProblem& p, const VectorXd& y, double h) {
    const int m = p.n_eq + p.n_ineq;
    if (p.constraint_jacobian && p.mode == GradientMode::Analytic) return p.constraint_jacobian(y);
    MatrixXd jac = MatrixXd::Zero(m, p.n);
    if (m == 0) return jac;
    const auto groups = detail::color_columns(p, m);
    VectorXd cp(p.n_eq), gp(p.n_ineq), cm(p.n_eq), gm(p.n_ineq), vp(m), vm(m);
    VectorXd z = y;
    std::vector<double> steps(p.n, 0.0);
    for (const auto& group : groups) {
        for (int j : group) {
            steps[j] = h * std::max(1.0, std::abs(y[j]));
            z[j] = y[j] + steps[j];
        }
        p.constraints(z, cp, gp);
        for (int j : group) z[j] = y[j] - steps[j];
        p.constraints(z, cm, gm);
        for (int j : group) z[j] = y[j];
        vp << cp, gp;
        vm << cm, gm;
        const VectorXd diff = vp - vm;
        for (int j : group) {
            if (p.sparsity.empty()) {
                jac.col(j) = diff / (2.0 * steps[j]);
            } else {
                for (int r : p.sparsity[j]) jac(r, j) = diff[r] / (2.0 * steps[j]);
            }
        }
    }
    return jac;
}

/// Worst relative error |a - fd| / max(|fd|, 1e-6) of the analytic derivatives
/// supplied by the problem against central differences with step h.
inline double check_gradients(const NlpProblem& p, const VectorXd& y, double h) {
    double worst = 0.0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-6); };
    if (p.objective_gradient) {
        const VectorXd a = p.objective_gradient(y);
        VectorXd z = y;
        for (int j = 0; j < p.n; ++j) {
            z[j] = y[j] + h;
            const double fp = p.objective(z);
            z[j] = y[j] - h;
            const double fm = p.objective(z);
            z[j] = y[j];
            worst = std::max(worst, rel(a[j], (fp - fm) / (2.0 * h)));
        }
    }
    if (p.constraint_jacobian) {
        NlpProblem dense = p;
        dense.mode = GradientMode::FiniteDifference;
        dense.sparsity.clear();
        dense.lower = VectorXd::Constant(p.n, -std::numeric_limits<double>::infinity());
        dense.upper = VectorXd::Constant(p.n, std::numeric_limits<double>::infinity());
        const MatrixXd fd = constraint_jacobian(dense, y, 0.0 + h);
        const MatrixXd a = p.constraint_jacobian(y);
        for (int r = 0; r < a.rows(); ++r)
            for (int c = 0; c < a.cols(); ++c) worst = std::max(worst, rel(a(r, c), fd(r, c)));
    }
    return worst;
}

/// Richardson ratio ||D(h) - D(h/2)|| / ||D(h/2) - D(h/4)|| of a step-dependent
/// estimate; about 4 for a second-order difference formula.
inline double richardson_ratio(const std::function<VectorXd(double)>& estimate, double h) {
    const VectorXd d1 = estimate(h), d2 = estimate(h / 2.0), d4 = estimate(h / 4.0);
    return (d1 - d2).norm() / (d2 - d4).norm();
}

namespace detail {

/// Augmented Lagrangian value and gradient for fixed multipliers and penalty.
struct AugmentedLagrangian {
    const NlpProblem& p;
    const SolverOptions& opt;
    VectorXd lambda, mu;
    double rho = 1.0;
    int evaluations = 0;

    double value(const VectorXd& y) {
        ++evaluations;
        double v = p.objective(y);
        if (p.n_eq + p.n_ineq == 0) return v;
        VectorXd c(p.n_eq), g(p.n_ineq);
        p.constraints(y, c, g);
        v += lambda.dot(c) + 0.5 * rho * c.squaredNorm();
        const VectorXd shifted = (mu - rho * g).cwiseMax(0.0);
        v += (shifted.squaredNorm() - mu.squaredNorm()) / (2.0 * rho);
        return v;
    }

    VectorXd gradient(const VectorXd& y) {
        VectorXd grad = objective_gradient(p, y, opt.fd_step);
        if (p.n_eq + p.n_ineq == 0) return grad;
        VectorXd c(p.n_eq), g(p.n_ineq);
        p.constraints(y, c, g);
        const MatrixXd jac = constraint_jacobian(p, y, opt.fd_step);
        VectorXd w(p.n_eq + p.n_ineq);
        w << lambda + rho * c, -(mu - rho * g).cwiseMax(0.0);
        grad += jac.transpose() * w;
        return grad;
    }
};

struct InnerResult {
    VectorXd y;
    int iterations = 0;
    bool finite = true;
};

inline InnerResult lbfgs_box(AugmentedLagrangian& al, VectorXd y, double tol, int max_iter, int memory) {
    const VectorXd& lo = al.p.lower;
    const VectorXd& hi = al.p.upper;
    std::deque<VectorXd> s_hist, y_hist;
    double f = al.value(y);
    VectorXd g = al.gradient(y);
    InnerResult out;
    for (int it = 0; it < max_iter; ++it) {
        if (!std::isfinite(f) || !g.allFinite()) {
            out.finite = false;
            break;
        }
        const VectorXd pg = projected_gradient(y, g, lo, hi);
        if (pg.lpNorm<Eigen::Infinity>() <= tol) break;
        // Free set: variables not pinned at a bound by the gradient.
        Eigen::Array<bool, Eigen::Dynamic, 1> free(y.size());
        for (int i = 0; i < y.size(); ++i)
            free[i] = !((y[i] <= lo[i] && g[i] > 0.0) || (y[i] >= hi[i] && g[i] < 0.0) || lo[i] == hi[i]);
        VectorXd q = free.select(g, 0.0);
        const int k = static_cast<int>(s_hist.size());
        std::vector<double> alpha(k);
        for (int i = k - 1; i >= 0; --i) {
            const double rho_i = 1.0 / y_hist[i].dot(s_hist[i]);
            alpha[i] = rho_i * s_hist[i].dot(q);
            q -= alpha[i] * free.select(y_hist[i], 0.0);
        }
        if (k > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (int i = 0; i < k; ++i) {
            const double rho_i = 1.0 / y_hist[i].dot(s_hist[i]);
            const double beta = rho_i * y_hist[i].dot(q);
            q += (alpha[i] - beta) * free.select(s_hist[i], 0.0);
        }
        VectorXd d = -free.select(q, 0.0);
        if (!(g.dot(d) < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            d = -free.select(g, 0.0);
        }
        if (k == 0) {
            // First step: scale so that the largest move is modest.
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > 1.0) d /= dn;
        }
        double step = 1.0;
        VectorXd y_new;
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            y_new = project(y + step * d, lo, hi);
            f_new = al.value(y_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(y_new - y)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ++out.iterations;
        if (!accepted) {
            if (s_hist.empty()) break;  // no progress even along the steepest descent
            s_hist.clear();
            y_hist.clear();
            continue;
        }
        const VectorXd g_new = al.gradient(y_new);
        const VectorXd s = y_new - y, yy = g_new - g;
        const double decrease = f - f_new;
        y = y_new;
        f = f_new;
        g = g_new;
        if (s.dot(yy) > 1e-12 * s.norm() * yy.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(yy);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        if (s.lpNorm<Eigen::Infinity>() < 1e-14 && decrease <= 0.0) break;
    }
    out.y = y;
    return out;
}

}  // namespace detail

/// The same problem in the variables z = y / scale.
inline NlpProblem scaled_problem(const NlpProblem& p) {
    NlpProblem q = p;
    const VectorXd sc = p.scale;
    q.scale.resize(0);
    q.lower = p.lower.cwiseQuotient(sc);
    q.upper = p.upper.cwiseQuotient(sc);
    q.x0 = p.x0.cwiseQuotient(sc).cwiseMax(q.lower).cwiseMin(q.upper);
    q.objective = [f = p.objective, sc](const VectorXd& z) { return f(z.cwiseProduct(sc)); };
    if (p.objective_gradient)
        q.objective_gradient = [g = p.objective_gradient, sc](const VectorXd& z) {
            return VectorXd(g(z.cwiseProduct(sc)).cwiseProduct(sc));
        };
    if (p.constraints)
        q.constraints = [c = p.constraints, sc](const VectorXd& z, VectorXd& eq, VectorXd& ineq) {
            c(z.cwiseProduct(sc), eq, ineq);
        };
    if (p.constraint_jacobian)
        q.constraint_jacobian = [j = p.constraint_jacobian, sc](const VectorXd& z) {
            return MatrixXd(j(z.cwiseProduct(sc)) * sc.asDiagonal());
        };
    return q;
}

inline SolveResult solve(const NlpProblem& p, const SolverOptions& opt = {}) {
    p.validate();
    if (p.scale.size() != 0) {
        SolveResult r = solve(scaled_problem(p), opt);
        r.x = r.x.cwiseProduct(p.scale).cwiseMax(p.lower).cwiseMin(p.upper);
        r.report.max_violation = max_violation(p, r.x);
        if (r.report.status == SolveStatus::Converged && r.report.max_violation > opt.tolerance)
            r.report.status = SolveStatus::MaxIterations;
        return r;
    }
    const auto start = std::chrono::steady_clock::now();
    SolveResult res;
    VectorXd y = p.x0;
    if (opt.jitter > 0.0) {
        std::mt19937_64 gen(opt.seed);
        std::uniform_real_distribution<double> u(-opt.jitter, opt.jitter);
        for (int i = 0; i < p.n; ++i)
            if (p.lower[i] < p.upper[i]) y[i] += u(gen);
        y = detail::project(y, p.lower, p.upper);
    }

    detail::AugmentedLagrangian al{p, opt, VectorXd::Zero(p.n_eq), VectorXd::Zero(p.n_ineq), opt.initial_penalty};
    VectorXd c(p.n_eq), g(p.n_ineq);
    auto violation = [&](const VectorXd& z) {
        double v = 0.0;
        if (p.n_eq + p.n_ineq == 0) return v;
        p.constraints(z, c, g);
        if (p.n_eq) v = std::max(v, c.cwiseAbs().maxCoeff());
        if (p.n_ineq) v = std::max(v, (-g).cwiseMax(0.0).maxCoeff());
        return v;
    };

    double prev_violation = violation(y);
    double inner_tol = std::max(opt.optimality_tolerance, 1e-2);
    SolveReport& rep = res.report;
    rep.status = SolveStatus::MaxIterations;
    const bool constrained = p.n_eq + p.n_ineq > 0;
    // Feasible outer iterations in a row with no meaningful change (stationarity stall).
    int stalled = 0;
    double prev_objective = std::numeric_limits<double>::quiet_NaN();

    for (int outer = 0; outer < opt.max_outer; ++outer) {
        const VectorXd y_prev = y;
        const auto inner = detail::lbfgs_box(al, y, constrained ? inner_tol : opt.optimality_tolerance, opt.max_inner,
                                             opt.lbfgs_memory);
        rep.inner_iterations += inner.iterations;
        rep.iterations = outer + 1;
        if (!inner.finite || !inner.y.allFinite()) {
            rep.status = SolveStatus::NumericalFailure;
            break;
        }
        y = inner.y;
        const double v = violation(y);
        if (!std::isfinite(v)) {
            rep.status = SolveStatus::NumericalFailure;
            break;
        }
        if (constrained) {
            al.lambda = (al.lambda + al.rho * c).cwiseMax(-opt.multiplier_bound).cwiseMin(opt.multiplier_bound);
            al.mu = (al.mu - al.rho * g).cwiseMax(0.0).cwiseMin(opt.multiplier_bound);
        }
        // Stationarity of the ordinary Lagrangian with the updated multipliers.
        VectorXd lag_grad = objective_gradient(p, y, opt.fd_step);
        if (constrained) {
            const MatrixXd jac = constraint_jacobian(p, y, opt.fd_step);
            VectorXd w(p.n_eq + p.n_ineq);
            w << al.lambda, -al.mu;
            lag_grad += jac.transpose() * w;
        }
        rep.kkt_residual = detail::projected_gradient(y, lag_grad, p.lower, p.upper).lpNorm<Eigen::Infinity>();
        const double step_norm = (y - y_prev).lpNorm<Eigen::Infinity>();
        if (opt.log) {
            nlohmann::json rec{{"iteration", outer},
                               {"inner", inner.iterations},
                               {"objective", p.objective(y)},
                               {"violation", v},
                               {"step_norm", step_norm},
                               {"penalty", al.rho},
                               {"kkt", rep.kkt_residual}};
            *opt.log << rec.dump() << '\n';
        }
        const double obj = p.objective(y);
        const bool quiet = std::abs(obj - prev_objective) <= 1e-10 * std::max(1.0, std::abs(obj)) && step_norm <= 1e-8;
        stalled = v <= opt.tolerance && quiet ? stalled + 1 : 0;
        prev_objective = obj;
        if (v <= opt.tolerance && (rep.kkt_residual <= opt.optimality_tolerance || step_norm < 1e-12 || stalled >= 3)) {
            rep.status = SolveStatus::Converged;
            break;
        }
        if (!constrained) {
            // Inner loop already ran to its own tolerance or stalled.
            rep.status = rep.kkt_residual <= opt.optimality_tolerance ? SolveStatus::Converged
                                                                       : SolveStatus::MaxIterations;
            if (step_norm < 1e-14) break;
            continue;
        }
        if (v > opt.tolerance && v > 0.25 * prev_violation) {
            if (al.rho >= opt.max_penalty) {
                rep.status = SolveStatus::Infeasible;
                break;
            }
            al.rho = std::min(al.rho * opt.penalty_growth, opt.max_penalty);
        }
        prev_violation = std::min(prev_violation, v);
        inner_tol = std::max(opt.optimality_tolerance, 0.1 * inner_tol);
    }
    res.x = y;
    rep.objective = p.objective(y);
    rep.max_violation = max_violation(p, y);
    if (rep.status == SolveStatus::Converged && rep.max_violation > opt.tolerance) rep.status = SolveStatus::MaxIterations;
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace wair

#endif  // WAIR_NLP_HPP
