#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "koopsafe/common.hpp"

namespace koopsafe {

// Planar double integrator: z = (x, y, vx, vy), u = (ax, ay).
//   zdot = f(z) + g u + d(z),  f = (vx, vy, 0, 0),  g = [0 0; 0 0; I2]
struct DoubleIntegrator {
    static constexpr int n = 4;
    static constexpr int m = 2;

    static Vector f(const Vector& z) {
        Vector out = Vector::Zero(n);
        out(0) = z(2);
        out(1) = z(3);
        return out;
    }

    static Matrix g() {
        Matrix out = Matrix::Zero(n, m);
        out(2, 0) = 1.0;
        out(3, 1) = 1.0;
        return out;
    }
};

// Spatially varying gust field plus linear drag:
//   w_x(z) = Ax sin(k1 y) cos(k2 x) + mx
//   w_y(z) = Ay cos(k3 x) sin(k4 y) + my
//   d = (0, 0, Cd (w_x - vx), Cd (w_y - vy)), each acceleration clamped
// to [-D, D] so the sup-norm bound used by the error bound always holds.
struct WindField {
    double amp_x = 5.0;
    double amp_y = 5.0;
    double k1 = 0.5, k2 = 0.3, k3 = 0.4, k4 = 0.6;  // wavenumbers (1/m)
    double mean_x = 2.0;
    double mean_y = -1.0;
    double drag_coeff = 1.0;  // Cd (1/s)
    double D = 10.0;          // sup-norm cap (m/s^2)

    std::pair<double, double> velocity(const Vector& z) const {
        const double wx = amp_x * std::sin(k1 * z(1)) * std::cos(k2 * z(0)) +
                          mean_x;
        const double wy = amp_y * std::cos(k3 * z(0)) * std::sin(k4 * z(1)) +
                          mean_y;
        return {wx, wy};
    }
};

inline Vector wind_disturbance(const WindField& w, const Vector& z) {
    const auto [wx, wy] = w.velocity(z);
    Vector d = Vector::Zero(DoubleIntegrator::n);
    d(2) = std::clamp(w.drag_coeff * (wx - z(2)), -w.D, w.D);
    d(3) = std::clamp(w.drag_coeff * (wy - z(3)), -w.D, w.D);
    return d;
}

inline Vector plant_derivative(const Vector& z, const Vector& u,
                               const WindField& w) {
    return DoubleIntegrator::f(z) + DoubleIntegrator::g() * u +
           wind_disturbance(w, z);
}

enum class IntegrationMethod { Euler, Rk4 };

// Advance one step with the control held constant (zero-order hold).
inline Vector integrate_step(const Vector& z, const Vector& u,
                             const WindField& w, double dt,
                             IntegrationMethod method) {
    if (!(dt > 0.0)) throw DomainError("integrate_step: dt must be positive");
    Vector next;
    if (method == IntegrationMethod::Euler) {
        next = z + dt * plant_derivative(z, u, w);
    } else {
        const Vector k1 = plant_derivative(z, u, w);
        const Vector k2 = plant_derivative(z + 0.5 * dt * k1, u, w);
        const Vector k3 = plant_derivative(z + 0.5 * dt * k2, u, w);
        const Vector k4 = plant_derivative(z + dt * k3, u, w);
        next = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!next.allFinite())
        throw NumericalBlowupError(format_msg(
            "plant state diverged at |z|=", z.norm(), ", |u|=", u.norm(),
            ", dt=", dt));
    return next;
}

// Additive Gaussian measurement noise on the state and its derivative.
// Samples come from a counter-based stream keyed by (seed, step, channel)
// so identical configs reproduce identical trajectories bit for bit.
struct NoiseModel {
    double sigma_x = 0.0;
    double sigma_xdot = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (sigma_x < 0.0 || sigma_xdot < 0.0)
            throw ConfigError("noise sigmas must be nonnegative");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One standard normal draw per (seed, step, channel) via Box-Muller.
inline double standard_normal(std::uint64_t seed, std::uint64_t step,
                              std::uint64_t channel) {
    const std::uint64_t key =
        splitmix64(seed ^ splitmix64(step ^ splitmix64(channel + 0x51ed2701)));
    const std::uint64_t key2 = splitmix64(key);
    const double u1 = (static_cast<double>(key >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(key2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace detail

inline std::pair<Vector, Vector> measure(const Vector& z, const Vector& z_dot,
                                         const NoiseModel& noise,
                                         std::uint64_t step) {
    noise.validate();
    Vector z_meas = z;
    Vector z_dot_meas = z_dot;
    const auto n = static_cast<std::uint64_t>(z.size());
    if (noise.sigma_x > 0.0)
        for (std::uint64_t i = 0; i < n; ++i)
            z_meas(static_cast<Eigen::Index>(i)) +=
                noise.sigma_x * detail::standard_normal(noise.seed, step, i);
    if (noise.sigma_xdot > 0.0)
        for (std::uint64_t i = 0; i < n; ++i)
            z_dot_meas(static_cast<Eigen::Index>(i)) +=
                noise.sigma_xdot *
                detail::standard_normal(noise.seed, step, n + i);
    return {z_meas, z_dot_meas};
}

}  // namespace koopsafe
