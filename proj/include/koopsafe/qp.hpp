#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "koopsafe/common.hpp"

namespace koopsafe {

// Minimize 1/2 |u - u0|^2 subject to rows a_i . u >= b_i. The problems
// here are tiny (m = 2, a handful of rows), so a primal active-set method
// with closed-form equality projections is exact and fast.
struct QpProblem {
    Vector u0;
    std::vector<std::pair<Vector, double>> rows;

    void validate() const {
        if (u0.size() < 1 || !u0.allFinite())
            throw ConfigError("qp: nominal input must be finite, m >= 1");
        for (const auto& [a, b] : rows)
            if (a.size() != u0.size() || !a.allFinite() || !std::isfinite(b))
                throw ConfigError("qp: constraint row has bad dimension or entries");
    }
};

enum class QpStatus { Solved, Infeasible };

struct QpSolution {
    Vector u_star;
    std::vector<int> active_set;  // indices of tight rows
    Vector multipliers;           // per row, zero when inactive
    double kkt_residual = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::Solved;
    Vector slack;  // per-row slack, filled by solve_with_slack only
};

namespace detail {

inline constexpr double kQpTol = 1e-10;

struct EqSolve {
    Vector u;
    Vector mu;         // one multiplier per active row
    bool consistent;   // active equalities satisfied at u
};

// Projection onto the affine set {a_i . u = b_i, i in active}:
// u = u0 + A^T mu with (A A^T) mu = b - A u0. Linearly dependent rows are
// resolved by least-squares multipliers with a rank tolerance.
inline EqSolve solve_equality(const QpProblem& p,
                              const std::vector<int>& active) {
    const auto m = p.u0.size();
    EqSolve out;
    if (active.empty()) {
        out.u = p.u0;
        out.mu = Vector();
        out.consistent = true;
        return out;
    }
    const int k = static_cast<int>(active.size());
    Matrix A(k, m);
    Vector rhs(k);
    for (int i = 0; i < k; ++i) {
        A.row(i) = p.rows[active[i]].first.transpose();
        rhs(i) = p.rows[active[i]].second - p.rows[active[i]].first.dot(p.u0);
    }
    Matrix gram = A * A.transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
    cod.setThreshold(kQpTol);
    out.mu = cod.solve(rhs);
    out.u = p.u0 + A.transpose() * out.mu;
    out.consistent = (A * out.u - (rhs + A * p.u0)).lpNorm<Eigen::Infinity>() <=
                     1e-8;
    return out;
}

inline double kkt_residual(const QpProblem& p, const Vector& u,
                           const Vector& mu_full) {
    Vector stat = u - p.u0;
    double comp = 0.0;
    double feas = 0.0;
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
        const auto& [a, b] = p.rows[i];
        stat -= mu_full(static_cast<Eigen::Index>(i)) * a;
        const double gap = a.dot(u) - b;
        comp = std::max(comp,
                        std::abs(mu_full(static_cast<Eigen::Index>(i)) * gap));
        feas = std::max(feas, -gap);
        if (mu_full(static_cast<Eigen::Index>(i)) < 0.0)
            feas = std::max(feas, -mu_full(static_cast<Eigen::Index>(i)));
    }
    return std::max({stat.norm(), comp, feas});
}

// Degenerate-geometry fallback. The projection optimum always solves the
// equality subproblem of some row subset, so trying every subset either
// recovers the optimum or certifies that no subset projection is
// feasible, i.e. the polyhedron is empty.
struct Enumerated {
    bool feasible = false;
    Vector u;
    Vector mu;
    std::vector<int> active;
};

inline Enumerated enumerate_subsets(const QpProblem& p) {
    const int c = static_cast<int>(p.rows.size());
    if (c > 16)
        throw SolverFailureError(
            "qp: degenerate geometry with too many rows to enumerate");
    Enumerated best;
    double best_obj = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << c); ++mask) {
        std::vector<int> active;
        for (int i = 0; i < c; ++i)
            if (mask & (1 << i)) active.push_back(i);
        const auto eq = solve_equality(p, active);
        if (!eq.consistent) continue;
        if (active.size() > 0 && eq.mu.minCoeff() < -kQpTol) continue;
        bool feasible = true;
        for (const auto& [a, b] : p.rows)
            if (a.dot(eq.u) < b - 1e-9) feasible = false;
        if (!feasible) continue;
        const double obj = 0.5 * (eq.u - p.u0).squaredNorm();
        if (obj < best_obj) {
            best_obj = obj;
            best = {true, eq.u, eq.mu, active};
        }
    }
    return best;
}

}  // namespace detail

inline QpSolution solve(const QpProblem& p, int max_iterations = 100,
                        std::vector<int> initial_active = {}) {
    p.validate();
    const int c = static_cast<int>(p.rows.size());
    std::vector<int> active;
    for (int i : initial_active)
        if (i >= 0 && i < c) active.push_back(i);
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());

    QpSolution sol;
    sol.multipliers = Vector::Zero(c);

    const auto finish = [&](const Vector& u, const Vector& mu,
                            const std::vector<int>& act) {
        sol.u_star = u;
        sol.active_set = act;
        sol.multipliers = Vector::Zero(c);
        for (std::size_t i = 0; i < act.size(); ++i)
            sol.multipliers(act[i]) = mu(static_cast<Eigen::Index>(i));
        sol.kkt_residual = detail::kkt_residual(p, u, sol.multipliers);
        sol.status = QpStatus::Solved;
        return sol;
    };
    // Degenerate geometry (dependent rows) can cycle the add/drop loop;
    // resolved exactly by subset enumeration, which doubles as the
    // infeasibility certificate.
    const auto resolve_degenerate = [&]() {
        const auto best = detail::enumerate_subsets(p);
        if (best.feasible) return finish(best.u, best.mu, best.active);
        sol.status = QpStatus::Infeasible;
        sol.active_set = active;
        sol.u_star = p.u0;
        return sol;
    };

    std::vector<std::uint32_t> visited;
    for (int iter = 1; iter <= max_iterations; ++iter) {
        sol.iterations = iter;
        if (c <= 31) {
            std::uint32_t mask = 0;
            for (int i : active) mask |= (1u << i);
            if (std::find(visited.begin(), visited.end(), mask) !=
                visited.end())
                return resolve_degenerate();
            visited.push_back(mask);
        }

        auto eq = detail::solve_equality(p, active);

        int drop = -1;
        double most_negative = -detail::kQpTol;
        for (std::size_t i = 0; i < active.size(); ++i)
            if (eq.mu(static_cast<Eigen::Index>(i)) < most_negative) {
                most_negative = eq.mu(static_cast<Eigen::Index>(i));
                drop = static_cast<int>(i);
            }
        if (!eq.consistent && drop < 0) return resolve_degenerate();
        if (drop >= 0) {
            active.erase(active.begin() + drop);
            continue;
        }

        // All multipliers nonnegative: add the most violated row, lowest
        // index on ties.
        int add = -1;
        double worst = detail::kQpTol;
        for (int i = 0; i < c; ++i) {
            if (std::find(active.begin(), active.end(), i) != active.end())
                continue;
            const double viol = p.rows[i].second - p.rows[i].first.dot(eq.u);
            if (viol > worst) {
                worst = viol;
                add = i;
            }
        }
        if (add < 0) return finish(eq.u, eq.mu, active);
        active.insert(std::lower_bound(active.begin(), active.end(), add),
                      add);
    }
    throw SolverFailureError(format_msg(
        "qp: active-set iteration cap of ", max_iterations, " exceeded"));
}

// Feasibility fallback: one quadratically penalized slack per row,
// a_i . u + s_i >= b_i with cost 1/2 * slack_weight * |s|^2. Solved as an
// identity-Hessian problem in the scaled variables (u, sqrt(w) s).
inline QpSolution solve_with_slack(const QpProblem& p,
                                   double slack_weight = 1e3,
                                   int max_iterations = 100) {
    p.validate();
    if (!(slack_weight > 0.0))
        throw ConfigError("qp: slack weight must be positive");
    const auto m = p.u0.size();
    const int c = static_cast<int>(p.rows.size());
    const double root_w = std::sqrt(slack_weight);

    QpProblem lifted;
    lifted.u0 = Vector::Zero(m + c);
    lifted.u0.head(m) = p.u0;
    for (int i = 0; i < c; ++i) {
        Vector a = Vector::Zero(m + c);
        a.head(m) = p.rows[i].first;
        a(m + i) = 1.0 / root_w;
        lifted.rows.emplace_back(std::move(a), p.rows[i].second);
    }
    QpSolution inner = solve(lifted, max_iterations);

    QpSolution sol;
    sol.u_star = inner.u_star.head(m);
    sol.slack = inner.u_star.tail(c) / root_w;
    sol.active_set = inner.active_set;
    sol.multipliers = inner.multipliers;
    sol.iterations = inner.iterations;
    sol.kkt_residual = inner.kkt_residual;
    sol.status = inner.status;
    return sol;
}

}  // namespace koopsafe
