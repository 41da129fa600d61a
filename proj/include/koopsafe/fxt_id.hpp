#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "koopsafe/common.hpp"
#include "koopsafe/observables.hpp"

namespace koopsafe {

// Below this innovation norm the adaptation update is zero: for w > 2 the
// continuous flow magnitude ~ |nu|^{1-2/w} vanishes there anyway, and
// zeroing avoids dividing by a vanishing norm.
inline constexpr double kNuFloor = 1e-9;

// Gains of the fixed-time adaptation law. Gamma is diagonal (required by
// the error bound), a, b scale the two power terms, w > 2 sets the
// exponents, and s is the certified lower bound on sigma_N(Psi(x(t)))
// over the horizon.
struct AdaptationGains {
    Vector gamma_diag;  // N^2 positive diagonal entries of Gamma
    double a = 1.0;
    double b = 1.0;
    double w = 4.0;
    double s = 1.0;

    double lambda_max() const { return gamma_diag.maxCoeff(); }

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0))
            throw ConfigError(format_msg("adaptation gains need a, b > 0, got a=",
                                         a, " b=", b));
        if (!(w > 2.0))
            throw ConfigError(format_msg("adaptation gains need w > 2, got ", w));
        if (!(s > 0.0))
            throw ConfigError(format_msg("adaptation gains need s > 0, got ", s));
        if (gamma_diag.size() == 0 || gamma_diag.minCoeff() <= 0.0)
            throw ConfigError("Gamma must have positive diagonal entries");
    }

    // Uniform Gamma = gamma*I sized for a target settling time, with gamma
    // obtained by inverting the settling-time formula.
    static AdaptationGains for_settling_time(double T_target, int basis_size,
                                             double a = 1.0, double b = 1.0,
                                             double w = 4.0, double s = 1.0) {
        if (!(T_target > 0.0))
            throw ConfigError("target settling time must be positive");
        const double gamma = w * kPi / (4.0 * s * T_target * std::sqrt(a * b));
        AdaptationGains g;
        g.gamma_diag = Vector::Constant(
            static_cast<Eigen::Index>(basis_size) * basis_size, gamma);
        g.a = a;
        g.b = b;
        g.w = w;
        g.s = s;
        g.validate();
        return g;
    }
};

// T = w*pi / (4 * s * lambda_max(Gamma) * sqrt(a*b))
inline double settling_time(const AdaptationGains& g) {
    g.validate();
    return g.w * kPi / (4.0 * g.s * g.lambda_max() * std::sqrt(g.a * g.b));
}

// Decay rate of the bound angle A(t), scaled so the worst-case angle pi/2
// reaches zero exactly at the settling time: rate = (pi/2)/T.
inline double bound_angle_rate(const AdaptationGains& g) {
    return 2.0 * g.s * g.lambda_max() * std::sqrt(g.a * g.b) / g.w;
}

// Innovation nu = (dpsi/dx) xdot - Psi(x) lambda_hat. Along trajectories
// this equals Psi(x) (lambda* - lambda_hat), the signal the adaptation
// law drives to zero.
inline Vector innovation(const LiftedFrame& frame, const Vector& x_dot,
                         const Vector& lambda_hat) {
    if (x_dot.size() != frame.state_dim())
        throw DimensionError(format_msg("innovation: x_dot has length ",
                                        x_dot.size(), ", expected ",
                                        frame.state_dim()));
    return frame.jac * x_dot - psi_block_apply(frame.psi, lambda_hat);
}

// Vectorized generator estimate plus its adaptation clock.
struct GeneratorEstimate {
    Vector lambda_hat;  // N^2
    AdaptationGains gains;
    double T = 0.0;  // settling time implied by the gains
    double t = 0.0;  // elapsed adaptation time

    static GeneratorEstimate zero_initial(AdaptationGains g, int basis_size) {
        GeneratorEstimate e;
        e.lambda_hat = Vector::Zero(
            static_cast<Eigen::Index>(basis_size) * basis_size);
        e.T = settling_time(g);
        e.gains = std::move(g);
        return e;
    }

    bool settling_time_consistent() const {
        return std::abs(T - settling_time(gains)) <=
               1e-12 * std::max(1.0, std::abs(T));
    }
};

// One step of the adaptation law, integrated with explicit Euler in the
// overflow-safe direction form
//   dlambda = dt * Gamma Psi^T nu_hat * (a|nu|^{1+2/w} + b|nu|^{1-2/w}),
// then clamped at the innovation line minimum: with p = Psi dlambda the
// step is scaled by alpha = min(1, <nu,p>/<p,p>). An unclamped Euler step
// overshoots the nu = 0 manifold once dt * gamma * |psi|^2 * (a|nu|^{2/w}
// + b|nu|^{-2/w}) exceeds one, which both chatters and breaks the
// Lyapunov decrease; the clamp is inactive whenever Euler does not
// overshoot.
inline GeneratorEstimate adapt_step(const GeneratorEstimate& est,
                                    const LiftedFrame& frame,
                                    const Vector& x_dot, double dt,
                                    double nu_floor = kNuFloor) {
    if (!(dt > 0.0)) throw DomainError("adapt_step: dt must be positive");
    GeneratorEstimate out = est;
    out.t += dt;

    const Vector nu = innovation(frame, x_dot, est.lambda_hat);
    const double nu_norm = nu.norm();
    if (nu_norm <= nu_floor) return out;

    const Vector nu_hat = nu / nu_norm;
    const double expo = 2.0 / est.gains.w;
    const double mag = est.gains.a * std::pow(nu_norm, 1.0 + expo) +
                       est.gains.b * std::pow(nu_norm, 1.0 - expo);
    Vector step = psi_block_transpose_apply(frame.psi, nu_hat);
    step.array() *= est.gains.gamma_diag.array();
    step *= mag * dt;

    const Vector p = psi_block_apply(frame.psi, step);
    const double pp = p.squaredNorm();
    double alpha = 1.0;
    if (pp > 0.0) alpha = std::clamp(nu.dot(p) / pp, 0.0, 1.0);

    out.lambda_hat = est.lambda_hat + alpha * step;
    if (!out.lambda_hat.allFinite())
        throw NumericalBlowupError(format_msg(
            "adaptation update is non-finite (|nu|=", nu_norm, ", dt=", dt,
            "); reduce the simulation step"));
    return out;
}

// d_hat(x) = (dpsi/dx)^+ Psi(x) lambda_hat - f(x) - g(x) u
inline Vector reconstruct_disturbance(const LiftedFrame& frame,
                                      const Vector& lambda_hat,
                                      const Vector& f_x, const Matrix& g_x,
                                      const Vector& u) {
    const int n = frame.state_dim();
    if (f_x.size() != n || g_x.rows() != n || g_x.cols() != u.size())
        throw DimensionError("reconstruct_disturbance: inconsistent f, g, u");
    return frame.jac_pinv * psi_block_apply(frame.psi, lambda_hat) - f_x -
           g_x * u;
}

// Singular values of W(t) = (dpsi/dx)^+ Psi(x): the block structure gives
// sigma_i(W) = |psi| * sigma_i(J^+), so the extremes come straight from
// the frame's Jacobian SVD.
inline double sigma_max_W(const LiftedFrame& frame) {
    return frame.psi.norm() / frame.sigma_min_jac;
}
inline double sigma_min_W(const LiftedFrame& frame) {
    return frame.psi.norm() / frame.sigma_max_jac;
}

// Constants of the transient error bound, frozen at t = 0. Requires
// lambda_hat(0) = 0 and diagonal Gamma.
struct ErrorBoundParams {
    double D = 0.0;             // sup-norm bound on the true disturbance
    double Lambda = 0.0;        // sqrt(2 lambda_max(Gamma)) (a/b)^{w/4}
    double Xi = 0.0;            // initial bound angle
    double sigma_min_W0 = 0.0;  // smallest nonzero singular value of W(0)

    static ErrorBoundParams init(double D, const AdaptationGains& gains,
                                 const LiftedFrame& first_frame) {
        gains.validate();
        if (!(D > 0.0)) throw ConfigError("disturbance bound D must be > 0");
        ErrorBoundParams p;
        p.D = D;
        p.sigma_min_W0 = sigma_min_W(first_frame);
        p.Lambda = std::sqrt(2.0 * gains.lambda_max()) *
                   std::pow(gains.a / gains.b, gains.w / 4.0);
        // l = (2D / sigma_min(W0)) * ones(N^2); Xi = atan( sqrt(b/a) *
        // (l^T Gamma^{-1} l / 2)^{1/w} )
        const double l = 2.0 * D / p.sigma_min_W0;
        const double quad =
            0.5 * l * l * gains.gamma_diag.cwiseInverse().sum();
        p.Xi = std::atan(std::sqrt(gains.b / gains.a) *
                         std::pow(quad, 1.0 / gains.w));
        return p;
    }
};

// delta(t) = Lambda * sigma_max(W(t)) * tan^{w/2}(A(t)), with
// A(t) = max{Xi - rate*t, 0}. Returns (delta, A); delta is zero once the
// angle clamps, which happens no later than the settling time.
inline std::pair<double, double> error_bound(const ErrorBoundParams& params,
                                             const AdaptationGains& gains,
                                             const LiftedFrame& frame,
                                             double t) {
    if (t < 0.0) throw DomainError("error_bound: t must be nonnegative");
    const double A = std::max(params.Xi - bound_angle_rate(gains) * t, 0.0);
    if (A == 0.0) return {0.0, 0.0};
    const double delta =
        params.Lambda * sigma_max_W(frame) * std::pow(std::tan(A), gains.w / 2.0);
    return {delta, A};
}

struct ErrorBoundDerivative {
    double value = 0.0;
    // True when no sigma_max(W) history was available and only the
    // analytic angle term is included.
    bool missing_sigma_rate = false;
};

// delta_dot(t): chain rule of the bound, with sigma_dot_max(W) supplied as
// a finite difference over the last two logged frames (pass no previous
// value at the first frame).
inline ErrorBoundDerivative error_bound_derivative(
    const ErrorBoundParams& params, const AdaptationGains& gains,
    const LiftedFrame& frame, double t,
    std::optional<double> sigma_max_prev, double fd_step) {
    if (!(fd_step > 0.0))
        throw DomainError("error_bound_derivative: fd_step must be positive");
    const double rate = bound_angle_rate(gains);
    const double A = std::max(params.Xi - rate * t, 0.0);
    if (A == 0.0) return {0.0, false};

    const double smax = sigma_max_W(frame);
    const double tanA = std::tan(A);
    const double sec2 = 1.0 / (std::cos(A) * std::cos(A));
    const double angle_term = -params.Lambda * smax * (gains.w / 2.0) * rate *
                              std::pow(tanA, gains.w / 2.0 - 1.0) * sec2;
    if (!sigma_max_prev.has_value()) return {angle_term, true};

    const double sigma_dot = (smax - *sigma_max_prev) / fd_step;
    const double drift_term =
        params.Lambda * sigma_dot * std::pow(tanA, gains.w / 2.0);
    return {angle_term + drift_term, false};
}

// Reconstructed disturbance with its transient bound, as consumed by the
// safety filters.
struct DisturbanceEstimate {
    Vector d_hat;
    double delta = 0.0;
    double delta_dot = 0.0;
    double sigma_max_W = 0.0;
    bool delta_dot_partial = false;
};

// Batch least-squares fit of the generator vector from recorded frames:
// minimizes sum_k |Psi(x_k) lambda - J_k xdot_k|^2. The problem decouples
// into N independent N-dimensional solves sharing the Gram matrix
// sum psi psi^T.
inline Vector batch_generator_fit(
    const std::vector<std::pair<LiftedFrame, Vector>>& samples) {
    if (samples.empty())
        throw IllConditionedDataError("batch fit: no samples");
    const int N = samples.front().first.basis_size();
    if (static_cast<int>(samples.size()) < N)
        throw IllConditionedDataError(
            format_msg("batch fit: need at least ", N, " samples, got ",
                       samples.size()));
    Matrix gram = Matrix::Zero(N, N);
    Matrix rhs = Matrix::Zero(N, N);  // column j: sum_k psi_k * (J_k xdot_k)_j
    for (const auto& [frame, x_dot] : samples) {
        const Vector y = frame.jac * x_dot;
        gram.noalias() += frame.psi * frame.psi.transpose();
        rhs.noalias() += frame.psi * y.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const double eig_min = es.eigenvalues()(0);
    const double eig_max = es.eigenvalues()(N - 1);
    if (eig_min <= 1e-12 * std::max(eig_max, 1.0))
        throw IllConditionedDataError(format_msg(
            "batch fit: Gram matrix singular, smallest eigenvalue ", eig_min));
    const Matrix blocks = gram.ldlt().solve(rhs);
    Vector lambda(static_cast<Eigen::Index>(N) * N);
    for (int j = 0; j < N; ++j) lambda.segment(j * static_cast<Eigen::Index>(N), N) = blocks.col(j);
    return lambda;
}

// Stateful wrapper driven by the simulation loop: adapts the generator
// estimate, reconstructs d_hat, and evaluates the bound and its
// derivative with the required sigma_max(W) history.
class FixedTimeEstimator {
public:
    FixedTimeEstimator(AdaptationGains gains, int basis_size, double D,
                       double nu_floor = kNuFloor)
        : est_(GeneratorEstimate::zero_initial(std::move(gains), basis_size)),
          D_(D),
          nu_floor_(nu_floor) {}

    // Override the initial estimate (identification demos); the error
    // bound requires lambda_hat(0) = 0 and is disabled otherwise.
    void set_initial_estimate(const Vector& lambda0) {
        if (lambda0.size() != est_.lambda_hat.size())
            throw DimensionError("initial estimate has wrong length");
        est_.lambda_hat = lambda0;
        bound_valid_ = lambda0.isZero(0.0);
    }

    DisturbanceEstimate update(const LiftedFrame& frame,
                               const Vector& x_dot_meas, const Vector& f_x,
                               const Matrix& g_x, const Vector& u, double dt) {
        if (!params_.has_value())
            params_ = ErrorBoundParams::init(D_, est_.gains, frame);
        const double t_now = est_.t;
        est_ = adapt_step(est_, frame, x_dot_meas, dt, nu_floor_);

        DisturbanceEstimate d;
        d.d_hat = reconstruct_disturbance(frame, est_.lambda_hat, f_x, g_x, u);
        d.sigma_max_W = sigma_max_W(frame);
        if (bound_valid_) {
            d.delta = error_bound(*params_, est_.gains, frame, t_now).first;
            const auto dd = error_bound_derivative(
                *params_, est_.gains, frame, t_now, prev_sigma_max_, dt);
            d.delta_dot = dd.value;
            d.delta_dot_partial = dd.missing_sigma_rate;
        }
        prev_sigma_max_ = d.sigma_max_W;
        return d;
    }

    const GeneratorEstimate& estimate() const { return est_; }
    const std::optional<ErrorBoundParams>& bound_params() const {
        return params_;
    }

private:
    GeneratorEstimate est_;
    double D_;
    double nu_floor_;
    bool bound_valid_ = true;
    std::optional<ErrorBoundParams> params_;
    std::optional<double> prev_sigma_max_;
};

// Non-recursive baseline: accumulates every sample and refits the
// generator by least squares at a fixed period. Until the first
// successful fit the disturbance estimate is zero.
class BatchEstimator {
public:
    BatchEstimator(int basis_size, double refit_period)
        : N_(basis_size),
          refit_period_(refit_period),
          next_refit_(refit_period) {}

    Vector update(const LiftedFrame& frame, const Vector& x_dot_meas,
                  const Vector& f_x, const Matrix& g_x, const Vector& u,
                  double dt) {
        t_ += dt;
        samples_.emplace_back(frame, x_dot_meas);
        if (t_ >= next_refit_ && static_cast<int>(samples_.size()) >= N_) {
            try {
                lambda_ = batch_generator_fit(samples_);
            } catch (const IllConditionedDataError& e) {
                log_warn(format_msg("batch refit skipped: ", e.what()));
            }
            next_refit_ += refit_period_;
        }
        if (!lambda_.has_value())
            return Vector::Zero(frame.state_dim());
        return reconstruct_disturbance(frame, *lambda_, f_x, g_x, u);
    }

    bool has_fit() const { return lambda_.has_value(); }

private:
    int N_;
    double refit_period_;
    double t_ = 0.0;
    double next_refit_;
    std::optional<Vector> lambda_;
    std::vector<std::pair<LiftedFrame, Vector>> samples_;
};

}  // namespace koopsafe
