#include <catch_amalgamated.hpp>

#include <cmath>

#include "koopsafe/plant.hpp"

using namespace koopsafe;

namespace {

WindField drag_only() {
    WindField w;
    w.amp_x = w.amp_y = 0.0;
    w.mean_x = w.mean_y = 0.0;
    return w;
}

}  // namespace

TEST_CASE("wind disturbance vanishes when velocity matches the gusts") {
    WindField w;
    Vector z(4);
    z << 1.2, -0.7, 0.0, 0.0;
    const auto [wx, wy] = w.velocity(z);
    z(2) = wx;
    z(3) = wy;
    REQUIRE(wind_disturbance(w, z).norm() == 0.0);
}

TEST_CASE("wind disturbance clamps at the sup-norm cap") {
    WindField w;
    w.amp_x = 0.0;
    w.mean_x = 5.0;  // w_x = 5 everywhere
    Vector z(4);
    z << 0.0, 0.0, -6.0, 0.0;  // raw d_x = 1 * (5 - (-6)) = 11
    const Vector d = wind_disturbance(w, z);
    REQUIRE(d(2) == 10.0);
    REQUIRE(d(0) == 0.0);
    REQUIRE(d(1) == 0.0);
}

TEST_CASE("wind stays within the cap over a position-velocity grid") {
    WindField w;
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j) {
            Vector z(4);
            z << -10.0 + 20.0 * i / 49.0, -10.0 + 20.0 * j / 49.0,
                5.0 * std::sin(i * 0.7), 5.0 * std::cos(j * 0.9);
            const Vector d = wind_disturbance(w, z);
            REQUIRE(d.lpNorm<Eigen::Infinity>() <= w.D);
        }
}

TEST_CASE("plant derivative composes drift, input, and wind") {
    WindField none = drag_only();
    none.drag_coeff = 0.0;
    Vector z(4);
    z << 0.0, 0.0, 1.0, 2.0;
    const Vector zdot = plant_derivative(z, Vector::Zero(2), none);
    Vector want(4);
    want << 1.0, 2.0, 0.0, 0.0;
    REQUIRE((zdot - want).norm() == 0.0);

    // u canceling the disturbance freezes the velocities
    WindField w;
    const Vector d = wind_disturbance(w, z);
    Vector u(2);
    u << -d(2), -d(3);
    const Vector frozen = plant_derivative(z, u, w);
    REQUIRE(frozen(2) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(frozen(3) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("pure drag dissipates speed") {
    const WindField w = drag_only();
    Vector z(4);
    z << 0.0, 0.0, 3.0, -4.0;
    double prev = z.segment<2>(2).norm();
    for (int k = 0; k < 1000; ++k) {
        z = integrate_step(z, Vector::Zero(2), w, 1e-3,
                           IntegrationMethod::Rk4);
        const double speed = z.segment<2>(2).norm();
        REQUIRE(speed <= prev + 1e-12);
        prev = speed;
    }
}

TEST_CASE("rk4 matches the exact drag exponential") {
    const WindField w = drag_only();  // vdot = -v
    Vector z(4);
    z << 1.0, -2.0, 3.0, -4.0;
    const Vector z0 = z;
    const double dt = 1e-3;
    const int steps = 1000;
    for (int k = 0; k < steps; ++k)
        z = integrate_step(z, Vector::Zero(2), w, dt, IntegrationMethod::Rk4);
    const double t = steps * dt;
    const double decay = std::exp(-w.drag_coeff * t);
    Vector want(4);
    want << z0(0) + z0(2) * (1.0 - decay) / w.drag_coeff,
        z0(1) + z0(3) * (1.0 - decay) / w.drag_coeff, z0(2) * decay,
        z0(3) * decay;
    REQUIRE((z - want).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("halving dt roughly halves the euler global error") {
    const WindField w = drag_only();
    const auto run_euler = [&](double dt) {
        Vector z(4);
        z << 0.0, 0.0, 3.0, -4.0;
        const int steps = static_cast<int>(1.0 / dt);
        for (int k = 0; k < steps; ++k)
            z = integrate_step(z, Vector::Zero(2), w, dt,
                               IntegrationMethod::Euler);
        return z;
    };
    const double decay = std::exp(-1.0);
    Vector exact(4);
    exact << 3.0 * (1.0 - decay), -4.0 * (1.0 - decay), 3.0 * decay,
        -4.0 * decay;
    const double err_coarse = (run_euler(2e-3) - exact).norm();
    const double err_fine = (run_euler(1e-3) - exact).norm();
    REQUIRE(err_coarse / err_fine == Catch::Approx(2.0).margin(0.3));
}

TEST_CASE("zero dynamics leave the state unchanged") {
    WindField w = drag_only();
    Vector z(4);
    z << 0.4, -0.8, 0.0, 0.0;
    const Vector next =
        integrate_step(z, Vector::Zero(2), w, 1e-3, IntegrationMethod::Rk4);
    REQUIRE((next - z).norm() == 0.0);
}

TEST_CASE("rk4 and euler agree on the smooth disturbance-free run") {
    WindField none = drag_only();
    none.drag_coeff = 0.0;
    Vector ze(4), zr(4);
    ze << 0.0, 0.0, 1.0, 0.5;
    zr = ze;
    Vector u(2);
    u << 0.3, -0.2;
    for (int k = 0; k < 1000; ++k) {
        ze = integrate_step(ze, u, none, 1e-3, IntegrationMethod::Euler);
        zr = integrate_step(zr, u, none, 1e-3, IntegrationMethod::Rk4);
    }
    REQUIRE((ze - zr).norm() <= 1e-3);
}

TEST_CASE("integration guards") {
    const WindField w = drag_only();
    Vector z(4);
    z << 0.0, 0.0, 0.0, 0.0;
    REQUIRE_THROWS_AS(
        integrate_step(z, Vector::Zero(2), w, 0.0, IntegrationMethod::Rk4),
        DomainError);
    Vector huge(2);
    huge << 1e308, 1e308;
    Vector z2(4);
    z2 << 0.0, 0.0, 1e308, 0.0;
    REQUIRE_THROWS_AS(
        integrate_step(z2, huge, w, 1e3, IntegrationMethod::Euler),
        NumericalBlowupError);
}

TEST_CASE("measurement noise is deterministic per (seed, step, channel)") {
    NoiseModel noise;
    noise.sigma_x = 0.1;
    noise.sigma_xdot = 0.2;
    noise.seed = 42;
    Vector z(4), zdot(4);
    z << 1.0, 2.0, 3.0, 4.0;
    zdot << 0.1, 0.2, 0.3, 0.4;

    const auto [z1, d1] = measure(z, zdot, noise, 7);
    const auto [z2, d2] = measure(z, zdot, noise, 7);
    REQUIRE((z1 - z2).norm() == 0.0);
    REQUIRE((d1 - d2).norm() == 0.0);

    const auto [z3, d3] = measure(z, zdot, noise, 8);
    REQUIRE((z1 - z3).norm() > 0.0);

    NoiseModel off;
    const auto [z4, d4] = measure(z, zdot, off, 7);
    REQUIRE((z4 - z).norm() == 0.0);
    REQUIRE((d4 - zdot).norm() == 0.0);
}

TEST_CASE("noise sample statistics match the configured sigma") {
    NoiseModel noise;
    noise.sigma_x = 0.1;
    noise.seed = 5;
    const Vector z = Vector::Zero(4);
    const Vector zdot = Vector::Zero(4);
    double sum = 0.0, sum_sq = 0.0;
    const int samples = 100000;
    for (int k = 0; k < samples / 4; ++k) {
        const auto [zm, dm] = measure(z, zdot, noise, k);
        for (int i = 0; i < 4; ++i) {
            sum += zm(i);
            sum_sq += zm(i) * zm(i);
        }
    }
    const double n = 4.0 * (samples / 4);
    const double mean = sum / n;
    const double stddev = std::sqrt(sum_sq / n - mean * mean);
    REQUIRE(std::abs(stddev - 0.1) <= 0.001);
}

TEST_CASE("negative noise sigma is rejected") {
    NoiseModel noise;
    noise.sigma_x = -0.1;
    REQUIRE_THROWS_AS(noise.validate(), ConfigError);
}
