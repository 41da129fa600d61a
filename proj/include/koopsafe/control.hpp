#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "koopsafe/common.hpp"
#include "koopsafe/fxt_id.hpp"
#include "koopsafe/qp.hpp"
#include "koopsafe/safety.hpp"

namespace koopsafe {

// Figure-eight (Gerono) reference: x* = A sin(wt), y* = A sin(wt)cos(wt).
struct Reference {
    double amplitude = 4.0;
    double omega = 0.2 * kPi;
};

struct ReferencePoint {
    Eigen::Vector2d pos;
    Eigen::Vector2d vel;
    Eigen::Vector2d acc;
};

inline ReferencePoint reference_at(const Reference& ref, double t) {
    if (t < 0.0) throw DomainError("reference_at: t must be nonnegative");
    const double A = ref.amplitude;
    const double w = ref.omega;
    ReferencePoint p;
    p.pos << A * std::sin(w * t), 0.5 * A * std::sin(2.0 * w * t);
    p.vel << A * w * std::cos(w * t), A * w * std::cos(2.0 * w * t);
    p.acc << -A * w * w * std::sin(w * t),
        -2.0 * A * w * w * std::sin(2.0 * w * t);
    return p;
}

struct ControllerConfig {
    SafetyRegime regime = SafetyRegime::Robust;
    double kp = 4.0;  // 1/s^2
    double kd = 4.0;  // 1/s
    std::optional<double> u_max;  // componentwise saturation of u0
    bool allow_slack = true;      // fall back to slack QP when infeasible
    double slack_weight = 1e3;
    int qp_max_iterations = 100;
};

// PD tracking with acceleration feedforward.
inline Vector nominal_input(const ControllerConfig& cfg, const Reference& ref,
                            const Vector& z, double t) {
    if (!(cfg.kp > 0.0) || !(cfg.kd > 0.0))
        throw ConfigError("tracking gains kp, kd must be positive");
    const auto r = reference_at(ref, t);
    Vector u0(DoubleIntegrator::m);
    u0 = r.acc + cfg.kd * (r.vel - z.segment<2>(2)) +
         cfg.kp * (r.pos - z.head<2>());
    if (cfg.u_max.has_value())
        u0 = u0.cwiseMax(-*cfg.u_max).cwiseMin(*cfg.u_max);
    return u0;
}

struct ControlDiagnostics {
    std::vector<int> active_set;
    int qp_iterations = 0;
    double kkt_residual = 0.0;
    double slack_total = 0.0;
    bool used_slack = false;
    std::vector<SafetyConstraint> constraints;
};

// One controller evaluation: nominal input, one safety row per obstacle
// under the configured regime, then the minimally deviating QP solution.
inline std::pair<Vector, ControlDiagnostics> control_step(
    const ControllerConfig& cfg, const Reference& ref,
    const std::vector<ObstacleCbf>& obstacles, const Vector& omega_diag,
    const Vector& z, double t, const DisturbanceEstimate& d_est) {
    const DoubleIntegrator plant;
    const Vector u0 = nominal_input(cfg, ref, z, t);

    ControlDiagnostics diag;
    if (cfg.regime == SafetyRegime::Nominal) return {u0, diag};

    QpProblem qp;
    qp.u0 = u0;
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        SafetyConstraint c;
        switch (cfg.regime) {
            case SafetyRegime::Naive:
                c = build_naive(obstacles[i], z, d_est.d_hat, plant);
                break;
            case SafetyRegime::Robust:
                c = build_robust(obstacles[i], z, d_est.d_hat, d_est.delta,
                                 plant);
                break;
            default:
                c = build_robust_adaptive(obstacles[i], z, d_est.d_hat,
                                          d_est.delta, d_est.delta_dot,
                                          omega_diag, plant);
                break;
        }
        c.obstacle_index = static_cast<int>(i);
        qp.rows.emplace_back(c.row, c.rhs);
        diag.constraints.push_back(std::move(c));
    }

    QpSolution sol = solve(qp, cfg.qp_max_iterations);
    if (sol.status == QpStatus::Infeasible) {
        if (!cfg.allow_slack)
            throw ControllerError(format_msg(
                "safety QP infeasible at t=", t, ", z=[", z(0), ", ", z(1),
                ", ", z(2), ", ", z(3), "] with slack disabled"));
        sol = solve_with_slack(qp, cfg.slack_weight, cfg.qp_max_iterations);
        diag.used_slack = true;
        diag.slack_total = sol.slack.lpNorm<1>();
    }
    diag.active_set = sol.active_set;
    diag.qp_iterations = sol.iterations;
    diag.kkt_residual = sol.kkt_residual;
    return {sol.u_star, diag};
}

}  // namespace koopsafe
