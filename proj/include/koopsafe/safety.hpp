#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "koopsafe/common.hpp"
#include "koopsafe/plant.hpp"

namespace koopsafe {

enum class SafetyRegime { Nominal, Naive, Robust, RobustAdaptive };

inline std::string regime_name(SafetyRegime r) {
    switch (r) {
        case SafetyRegime::Nominal: return "nominal";
        case SafetyRegime::Naive: return "naive";
        case SafetyRegime::Robust: return "robust";
        case SafetyRegime::RobustAdaptive: return "robust-adaptive";
    }
    return "?";
}

// Circular obstacle with barrier h(z) = (x-cx)^2 + (y-cy)^2 - R^2. The
// barrier has relative degree two in the acceleration input, so the
// filters act on the first-order surrogate H = hdot + k1 h.
struct ObstacleCbf {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 1.0;
    double k1 = 1.0;          // surrogate gain (1/s)
    double alpha_gain = 1.0;  // linear class-K gain

    void validate() const {
        if (!(radius > 0.0) || !(k1 > 0.0) || !(alpha_gain > 0.0))
            throw ConfigError("obstacle needs radius, k1, alpha_gain > 0");
    }

    double h(const Vector& z) const {
        const double dx = z(0) - cx;
        const double dy = z(1) - cy;
        return dx * dx + dy * dy - radius * radius;
    }

    Vector h_gradient(const Vector& z) const {
        Vector g = Vector::Zero(DoubleIntegrator::n);
        g(0) = 2.0 * (z(0) - cx);
        g(1) = 2.0 * (z(1) - cy);
        return g;
    }
};

struct HocbfTerms {
    double H = 0.0;       // hdot + k1 h
    Vector grad_H;        // state gradient of H
    double drift = 0.0;   // u-independent part of Hdot (L_f H)
};

inline HocbfTerms hocbf_surrogate(const ObstacleCbf& cbf, const Vector& z) {
    const double dx = z(0) - cbf.cx;
    const double dy = z(1) - cbf.cy;
    const double vx = z(2);
    const double vy = z(3);
    const double h = cbf.h(z);
    const double h_dot = 2.0 * dx * vx + 2.0 * dy * vy;

    HocbfTerms t;
    t.H = h_dot + cbf.k1 * h;
    t.grad_H = Vector::Zero(DoubleIntegrator::n);
    t.grad_H(0) = 2.0 * vx + 2.0 * cbf.k1 * dx;
    t.grad_H(1) = 2.0 * vy + 2.0 * cbf.k1 * dy;
    t.grad_H(2) = 2.0 * dx;
    t.grad_H(3) = 2.0 * dy;
    t.drift = 2.0 * (vx * vx + vy * vy) + cbf.k1 * h_dot;
    return t;
}

// One affine inequality row . u >= rhs for the control QP.
struct SafetyConstraint {
    Vector row;
    double rhs = 0.0;
    int obstacle_index = -1;
    SafetyRegime regime = SafetyRegime::Naive;
    double margin = 0.0;  // h at build time
};

// Naive condition trusts the estimate exactly:
//   L_f H + <grad H, d_hat> + L_g H u >= -alpha(H)
inline SafetyConstraint build_naive(const ObstacleCbf& cbf, const Vector& z,
                                    const Vector& d_hat,
                                    const DoubleIntegrator& plant) {
    cbf.validate();
    const auto t = hocbf_surrogate(cbf, z);
    SafetyConstraint c;
    c.row = plant.g().transpose() * t.grad_H;
    c.rhs = -cbf.alpha_gain * t.H - t.drift - t.grad_H.dot(d_hat);
    c.regime = SafetyRegime::Naive;
    c.margin = cbf.h(z);
    return c;
}

// Robust condition: naive tightened by the worst-case effect of the
// residual bound, b_d = delta * sum_i |dH/dz_i|.
inline SafetyConstraint build_robust(const ObstacleCbf& cbf, const Vector& z,
                                     const Vector& d_hat, double delta,
                                     const DoubleIntegrator& plant) {
    if (delta < 0.0) throw DomainError("build_robust: delta must be >= 0");
    SafetyConstraint c = build_naive(cbf, z, d_hat, plant);
    const auto t = hocbf_surrogate(cbf, z);
    c.rhs += delta * t.grad_H.lpNorm<1>();
    c.regime = SafetyRegime::Robust;
    return c;
}

// Robust-adaptive condition on the shrunk barrier
//   h_r = H - 1/2 delta^2 Tr(Omega^{-1}):
//   L_f h_r + <grad h_r, d_hat> + L_g h_r u - r >= -alpha(h_r),
//   r = Tr(Omega^{-1}) delta deltadot + b_d.
// grad h_r = grad H, so only the rhs differs from the robust row.
inline SafetyConstraint build_robust_adaptive(const ObstacleCbf& cbf,
                                              const Vector& z,
                                              const Vector& d_hat,
                                              double delta, double delta_dot,
                                              const Vector& omega_diag,
                                              const DoubleIntegrator& plant) {
    if (delta < 0.0)
        throw DomainError("build_robust_adaptive: delta must be >= 0");
    if (omega_diag.size() == 0 || omega_diag.minCoeff() <= 0.0)
        throw ConfigError("build_robust_adaptive: Omega must be positive");
    const double tr_omega_inv = omega_diag.cwiseInverse().sum();
    const auto t = hocbf_surrogate(cbf, z);
    const double h_r = t.H - 0.5 * delta * delta * tr_omega_inv;
    if (h_r < 0.0)
        log_info(format_msg("robust-adaptive barrier negative (h_r=", h_r,
                            "): state outside the shrunk safe set"));

    SafetyConstraint c;
    c.row = plant.g().transpose() * t.grad_H;
    const double b_d = delta * t.grad_H.lpNorm<1>();
    const double r = tr_omega_inv * delta * delta_dot + b_d;
    c.rhs = -cbf.alpha_gain * h_r - t.drift - t.grad_H.dot(d_hat) + r;
    c.regime = SafetyRegime::RobustAdaptive;
    c.obstacle_index = -1;
    c.margin = cbf.h(z);
    return c;
}

// Minimum barrier value over a completed run: the run was safe iff the
// result is nonnegative.
inline double min_barrier(const std::vector<Vector>& states,
                          const std::vector<ObstacleCbf>& obstacles) {
    if (states.empty()) throw DomainError("min_barrier: empty log");
    if (obstacles.empty()) throw DomainError("min_barrier: no obstacles");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z : states)
        for (const auto& obs : obstacles) best = std::min(best, obs.h(z));
    return best;
}

}  // namespace koopsafe
