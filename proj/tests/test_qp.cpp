#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <optional>
#include <random>

#include "koopsafe/qp.hpp"
#include "test_support.hpp"

using namespace koopsafe;
using koopsafe_test::enumerate_qp;
using koopsafe_test::random_feasible_problem;

TEST_CASE("unconstrained minimum is the nominal input") {
    QpProblem p;
    p.u0 = Vector(2);
    p.u0 << 1.5, -0.25;
    const auto sol = solve(p);
    REQUIRE(sol.status == QpStatus::Solved);
    REQUIRE(sol.u_star == p.u0);
    REQUIRE(sol.active_set.empty());
    REQUIRE(sol.kkt_residual <= 1e-12);
}

TEST_CASE("projection onto a half-space") {
    QpProblem p;
    p.u0 = Vector(2);
    p.u0 << 1.0, 0.0;
    Vector a(2);
    a << -1.0, 0.0;
    p.rows.emplace_back(a, 0.0);  // -u_x >= 0
    const auto sol = solve(p);
    REQUIRE(sol.status == QpStatus::Solved);
    REQUIRE(sol.u_star(0) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sol.u_star(1) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sol.active_set == std::vector<int>{0});
}

TEST_CASE("random feasible problems match the enumeration oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const QpProblem p = random_feasible_problem(rng);
        const auto sol = solve(p);
        REQUIRE(sol.status == QpStatus::Solved);
        REQUIRE(sol.kkt_residual <= 1e-8);
        const auto oracle = enumerate_qp(p);
        REQUIRE(oracle.has_value());
        REQUIRE((sol.u_star - *oracle).lpNorm<Eigen::Infinity>() <= 1e-8);
        for (const auto& [a, b] : p.rows)
            REQUIRE(a.dot(sol.u_star) >= b - 1e-8);
        for (std::size_t i = 0; i < p.rows.size(); ++i)
            REQUIRE(std::abs(sol.multipliers(static_cast<Eigen::Index>(i)) *
                             (p.rows[i].first.dot(sol.u_star) -
                              p.rows[i].second)) <= 1e-8);
    }
}

TEST_CASE("solutions are deterministic bit for bit") {
    std::mt19937_64 rng(55);
    const QpProblem p = random_feasible_problem(rng);
    const auto s1 = solve(p);
    const auto s2 = solve(p);
    REQUIRE(std::memcmp(s1.u_star.data(), s2.u_star.data(),
                        sizeof(double) * s1.u_star.size()) == 0);
    REQUIRE(s1.active_set == s2.active_set);
    REQUIRE(s1.iterations == s2.iterations);
}

TEST_CASE("no feasible perturbation improves the objective") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        const QpProblem p = random_feasible_problem(rng);
        const auto sol = solve(p);
        const double obj = 0.5 * (sol.u_star - p.u0).squaredNorm();
        for (int probe = 0; probe < 100; ++probe) {
            Vector dir(2);
            dir << normal(rng), normal(rng);
            dir.normalize();
            const Vector candidate = sol.u_star + 1e-4 * dir;
            bool feasible = true;
            for (const auto& [a, b] : p.rows)
                if (a.dot(candidate) < b) feasible = false;
            if (!feasible) continue;
            const double cand_obj = 0.5 * (candidate - p.u0).squaredNorm();
            REQUIRE(cand_obj >= obj - 1e-12);
        }
    }
}

TEST_CASE("contradictory rows are reported infeasible with a certificate") {
    QpProblem p;
    p.u0 = Vector::Zero(2);
    Vector a1(2), a2(2);
    a1 << 1.0, 0.0;
    a2 << -1.0, 0.0;
    p.rows.emplace_back(a1, 1.0);  // u_x >= 1
    p.rows.emplace_back(a2, 1.0);  // -u_x >= 1
    const auto sol = solve(p);
    REQUIRE(sol.status == QpStatus::Infeasible);
    REQUIRE(sol.active_set.size() == 2);
}

TEST_CASE("iteration cap raises a solver failure") {
    QpProblem p;
    p.u0 = Vector::Zero(2);
    Vector a(2);
    a << 1.0, 0.0;
    p.rows.emplace_back(a, 1.0);
    REQUIRE_THROWS_AS(solve(p, 0), SolverFailureError);
}

TEST_CASE("slack variant: strictly feasible nominal input uses no slack") {
    QpProblem p;
    p.u0 = Vector(2);
    p.u0 << 0.5, 0.5;
    Vector a(2);
    a << 1.0, 0.0;
    p.rows.emplace_back(a, 0.0);  // u_x >= 0, satisfied at u0
    const auto exact = solve(p);
    const auto slack = solve_with_slack(p, 1e3);
    REQUIRE(slack.status == QpStatus::Solved);
    REQUIRE(slack.slack.lpNorm<Eigen::Infinity>() <= 1e-12);
    REQUIRE((slack.u_star - exact.u_star).norm() <= 1e-12);
}

TEST_CASE("slack variant matches the closed-form split on contradictions") {
    QpProblem p;
    p.u0 = Vector(2);
    p.u0 << 0.3, 0.7;
    Vector a1(2), a2(2);
    a1 << 1.0, 0.0;
    a2 << -1.0, 0.0;
    p.rows.emplace_back(a1, 1.0);
    p.rows.emplace_back(a2, 1.0);
    const double rho = 1e3;
    const auto sol = solve_with_slack(p, rho);
    REQUIRE(sol.status == QpStatus::Solved);
    // 1-D KKT: both rows active, u_x = u0_x / (1 + 2 rho), s_i = 1 -+ u_x.
    const double ux = 0.3 / (1.0 + 2.0 * rho);
    REQUIRE(sol.u_star(0) == Catch::Approx(ux).epsilon(1e-9));
    REQUIRE(sol.u_star(1) == Catch::Approx(0.7));
    REQUIRE(sol.slack(0) == Catch::Approx(1.0 - ux).epsilon(1e-9));
    REQUIRE(sol.slack(1) == Catch::Approx(1.0 + ux).epsilon(1e-9));
}

TEST_CASE("slack variant converges to the exact solution as weight grows") {
    QpProblem p;
    p.u0 = Vector(2);
    p.u0 << -2.0, 1.0;
    Vector a(2);
    a << 1.0, 1.0;
    p.rows.emplace_back(a, 1.0);  // active at the optimum
    const auto exact = solve(p);
    const auto tight = solve_with_slack(p, 1e8);
    const auto loose = solve_with_slack(p, 1e3);
    REQUIRE((tight.u_star - exact.u_star).lpNorm<Eigen::Infinity>() <= 1e-5);
    REQUIRE((loose.u_star - exact.u_star).lpNorm<Eigen::Infinity>() <= 1e-2);
    REQUIRE((tight.u_star - exact.u_star).lpNorm<Eigen::Infinity>() <
            (loose.u_star - exact.u_star).lpNorm<Eigen::Infinity>());
    REQUIRE_THROWS_AS(solve_with_slack(p, 0.0), ConfigError);
}

TEST_CASE("warm start from a previous active set") {
    std::mt19937_64 rng(31);
    const QpProblem p = random_feasible_problem(rng);
    const auto cold = solve(p);
    const auto warm = solve(p, 100, cold.active_set);
    REQUIRE((warm.u_star - cold.u_star).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("problem validation") {
    QpProblem p;
    p.u0 = Vector(0);
    REQUIRE_THROWS_AS(solve(p), ConfigError);
    p.u0 = Vector(2);
    p.u0 << 0.0, 0.0;
    Vector bad(3);
    bad << 1.0, 2.0, 3.0;
    p.rows.emplace_back(bad, 0.0);
    REQUIRE_THROWS_AS(solve(p), ConfigError);
}
