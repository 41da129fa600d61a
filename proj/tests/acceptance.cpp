// Acceptance suite: runs every gate criterion end to end against the
// shipped case-study configuration and the CLI, printing one pass/fail
// line per criterion. Exits nonzero if any criterion fails.
//
// usage: acceptance_tests <case_study_config> <cli_binary> <out_dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "koopsafe/config.hpp"
#include "koopsafe/id_demo.hpp"
#include "koopsafe/output.hpp"
#include "koopsafe/qp.hpp"
#include "koopsafe/simulation.hpp"
#include "koopsafe/svg_plot.hpp"
#include "test_support.hpp"

using namespace koopsafe;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass,
            const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id,
                name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 4) {
        std::fprintf(stderr,
                     "usage: acceptance_tests <config> <cli> <out_dir>\n");
        return 2;
    }
    const std::string config_path = argv[1];
    const std::string cli = argv[2];
    const std::string out_dir = argv[3];
    std::filesystem::create_directories(out_dir);

    const ScenarioConfig cfg = load_config(config_path);
    constexpr std::uint64_t kSeed = 1;

    // All eight scenario combinations, timed together; individual logs
    // feed criteria 1-3.
    const auto wall_start = std::chrono::steady_clock::now();
    std::map<std::string, RunLog> runs;
    for (const auto regime :
         {SafetyRegime::Nominal, SafetyRegime::Naive, SafetyRegime::Robust,
          SafetyRegime::RobustAdaptive})
        for (const bool noise : {false, true})
            runs.emplace(regime_name(regime) + (noise ? "+noise" : ""),
                         run_scenario(cfg, regime, kSeed, noise));
    const double wall_s = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - wall_start)
                              .count();

    const RunLog& robust = runs.at("robust");
    const double T = robust.summary.settling_time;

    // 1. Fixed-time identification on the noise-free robust run.
    {
        double max_err = 0.0;
        for (const auto& row : robust.rows)
            if (row.t >= T)
                max_err = std::max(max_err, (row.d_true - row.d_hat)
                                                .lpNorm<Eigen::Infinity>());
        const bool pass = max_err <= 0.01 * cfg.wind.D &&
                          robust.summary.runtime_ms < 60000.0 &&
                          wall_s < 60.0;
        report(1, "fixed-time identification", pass,
               "max |d - d_hat|_inf on [" + fmt(T) + ", 20] s = " +
                   fmt(max_err) + " <= " + fmt(0.01 * cfg.wind.D) +
                   ", 8-scenario wall time " + fmt(wall_s) + " s < 60 s");
    }

    // 2. Safety across regimes, noise-free and noisy.
    {
        const double h_nom = runs.at("nominal").summary.min_h;
        const double h_r = runs.at("robust").summary.min_h;
        const double h_rn = runs.at("robust+noise").summary.min_h;
        const double h_ra = runs.at("robust-adaptive").summary.min_h;
        const double h_ran = runs.at("robust-adaptive+noise").summary.min_h;
        const bool pass = h_nom < 0.0 && h_r >= 0.0 && h_rn >= 0.0 &&
                          h_ra >= 0.0 && h_ran >= 0.0;
        report(2, "safety", pass,
               "min h: nominal " + fmt(h_nom) + " < 0; robust " + fmt(h_r) +
                   ", robust+noise " + fmt(h_rn) + ", robust-adaptive " +
                   fmt(h_ra) + ", robust-adaptive+noise " + fmt(h_ran) +
                   " all >= 0");
    }

    // 3. Bound validity on the noise-free robust run.
    {
        int violations = 0;
        double worst = -1e300;
        bool delta_zero_after_T = true;
        for (const auto& row : robust.rows) {
            const double err =
                (row.d_true - row.d_hat).lpNorm<Eigen::Infinity>();
            if (err > row.delta + 1e-6) ++violations;
            worst = std::max(worst, err - row.delta);
            if (row.t > T && row.delta != 0.0) delta_zero_after_T = false;
        }
        const bool pass = violations == 0 && delta_zero_after_T;
        report(3, "bound validity", pass,
               std::to_string(violations) +
                   " rows violate |d - d_hat|_inf <= delta + 1e-6; worst "
                   "margin " +
                   fmt(worst) + "; delta(t>T) " +
                   (delta_zero_after_T ? "== 0" : "!= 0"));
    }

    // 4. Initial-condition independence of the identification demo.
    {
        const auto demo = run_id_demo();
        bool pass = demo.runs.size() == 5;
        double worst_ratio = 0.0;
        for (const auto& run : demo.runs) {
            if (!run.converged || run.residual_T > run.tolerance)
                pass = false;
            worst_ratio =
                std::max(worst_ratio, run.residual_T / run.tolerance);
        }
        if (demo.time_spread >= 0.10) pass = false;
        report(4, "initial-condition independence", pass,
               "5 initial norms in [0, 1e3]; worst residual(T)/tol = " +
                   fmt(worst_ratio) + "; convergence-time spread " +
                   fmt(100.0 * demo.time_spread) + "% < 10%");
    }

    // 5. QP correctness against the enumeration oracle.
    {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(424242);
        int mismatches = 0;
        double worst_kkt = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const QpProblem p = koopsafe_test::random_feasible_problem(rng);
            const QpSolution sol = solve(p);
            const auto oracle = koopsafe_test::enumerate_qp(p);
            if (sol.status != QpStatus::Solved || !oracle.has_value() ||
                (sol.u_star - *oracle).lpNorm<Eigen::Infinity>() > 1e-8)
                ++mismatches;
            worst_kkt = std::max(worst_kkt, sol.kkt_residual);
        }
        const double secs = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        const bool pass = mismatches == 0 && worst_kkt <= 1e-8 && secs < 5.0;
        report(5, "qp correctness", pass,
               "1000 instances, " + std::to_string(mismatches) +
                   " oracle mismatches, worst KKT residual " +
                   fmt(worst_kkt) + ", " + fmt(secs) + " s < 5 s");
    }

    // 6. Structural identities of the lifting.
    {
        bool pass = true;
        std::string why = "ok";
        std::mt19937_64 rng(9001);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> uni(-2.0, 2.0);

        const BasisSet sinus = cfg.basis.build(DoubleIntegrator::n);
        for (int trial = 0; trial < 100 && pass; ++trial) {
            Vector x(4);
            for (int i = 0; i < 4; ++i) x(i) = uni(rng);
            const Vector psi = sinus.psi(x);
            const int N = sinus.size();
            Matrix L(N, N);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) L(i, j) = normal(rng);
            Vector lambda(N * N);
            for (int j = 0; j < N; ++j) lambda.segment(j * N, N) = L.col(j);
            if ((psi_block_apply(psi, lambda) - L.transpose() * psi)
                    .lpNorm<Eigen::Infinity>() > 1e-10) {
                pass = false;
                why = "block identity Psi vec(L) != L^T psi";
            }
        }
        for (int N = 2; N <= 5 && pass; ++N) {
            Vector psi(N);
            for (int i = 0; i < N; ++i) psi(i) = normal(rng);
            Matrix dense = Matrix::Zero(N, N * N);
            for (int k = 0; k < N; ++k)
                dense.block(k, k * N, 1, N) = psi.transpose();
            Eigen::JacobiSVD<Matrix> svd(dense);
            for (int i = 0; i < N; ++i)
                if (std::abs(svd.singularValues()(i) - psi.norm()) > 1e-10) {
                    pass = false;
                    why = "nonzero singular values of Psi != |psi|";
                }
        }
        const BasisSet mono = BasisSet::monomials(4, 3);
        for (const BasisSet* basis : {&sinus, &mono}) {
            for (int trial = 0; trial < 100 && pass; ++trial) {
                Vector x(4);
                for (int i = 0; i < 4; ++i) x(i) = uni(rng);
                const Matrix jac = basis->jacobian(x);
                for (int j = 0; j < 4 && pass; ++j) {
                    Vector hi = x, lo = x;
                    hi(j) += 1e-5;
                    lo(j) -= 1e-5;
                    const Vector fd =
                        (basis->psi(hi) - basis->psi(lo)) / 2e-5;
                    for (int i = 0; i < basis->size(); ++i)
                        if (std::abs(jac(i, j) - fd(i)) >
                            1e-6 * std::max(1.0, std::abs(fd(i)))) {
                            pass = false;
                            why = "analytic gradient != central difference";
                        }
                }
            }
        }
        report(6, "structural identities", pass, why);
    }

    // 7. Settling-time formula on a parameter grid.
    {
        bool pass = true;
        double worst_rel = 0.0;
        for (double a : {0.5, 1.0, 2.0})
            for (double b : {0.5, 1.0, 4.0})
                for (double w : {3.0, 4.0, 6.0})
                    for (double s : {0.5, 1.0, 4.0})
                        for (double lmax :
                             {1.0, 26.179938779914945, 100.0}) {
                            AdaptationGains g;
                            g.gamma_diag = Vector::Constant(4, lmax);
                            g.a = a;
                            g.b = b;
                            g.w = w;
                            g.s = s;
                            const double got = settling_time(g);
                            const long double want =
                                (static_cast<long double>(w) / (4.0L * s)) *
                                kPi / lmax / std::sqrt(a) / std::sqrt(b);
                            const double rel = std::abs(
                                (got - static_cast<double>(want)) /
                                static_cast<double>(want));
                            worst_rel = std::max(worst_rel, rel);
                            if (rel > 1e-12) pass = false;
                        }
        // gamma sized for the case-study settling time
        const auto tuned = AdaptationGains::for_settling_time(0.12, 17);
        if (std::abs(tuned.lambda_max() - 26.179938779914945) > 1e-9)
            pass = false;
        if (std::abs(settling_time(tuned) - 0.12) > 1e-12 * 0.12)
            pass = false;
        report(7, "settling-time formula", pass,
               "grid worst relative error " + fmt(worst_rel) +
                   "; gamma = 26.18 gives T = 0.12 s");
    }

    // 8. CLI end to end: simulate three regimes, plot, check the SVGs.
    {
        bool pass = true;
        std::string why = "ok";
        const std::string sim_dir = out_dir + "/cli";
        std::filesystem::create_directories(sim_dir);
        for (const std::string regime :
             {"nominal", "robust", "robust-adaptive"}) {
            const std::string cmd = "\"" + cli + "\" simulate --config \"" +
                                    config_path + "\" --regime " + regime +
                                    " --seed 1 --noise off --out \"" +
                                    sim_dir + "\" > /dev/null 2>&1";
            if (run_cli(cmd) != 0) {
                pass = false;
                why = "simulate failed for " + regime;
            }
        }
        if (pass) {
            const std::string cmd =
                "\"" + cli + "\" plot --in \"" + sim_dir +
                "/nominal.csv\" \"" + sim_dir + "/robust.csv\" \"" + sim_dir +
                "/robust_adaptive.csv\" --config \"" + config_path +
                "\" --out \"" + sim_dir + "\" > /dev/null 2>&1";
            if (run_cli(cmd) != 0) {
                pass = false;
                why = "plot failed";
            }
        }
        const std::vector<std::string> svgs = {"xy_paths.svg", "barriers.svg",
                                               "disturbance.svg",
                                               "inputs.svg"};
        for (const auto& name : svgs) {
            const std::string path = sim_dir + "/" + name;
            if (!std::filesystem::exists(path)) {
                pass = false;
                why = "missing " + name;
            } else if (!koopsafe_test::xml_well_formed(slurp(path))) {
                pass = false;
                why = name + " is not well-formed XML";
            }
        }
        if (pass) {
            // summaries written by the CLI mirror criterion 2's verdicts
            nlohmann::json nom, rob;
            std::ifstream(sim_dir + "/nominal_summary.json") >> nom;
            std::ifstream(sim_dir + "/robust_summary.json") >> rob;
            if (!(nom.at("min_h").get<double>() < 0.0 &&
                  rob.at("min_h").get<double>() >= 0.0)) {
                pass = false;
                why = "CLI summaries disagree with the safety verdicts";
            }
        }
        report(8, "figures via the CLI", pass, why);
    }

    std::printf("%s: %d of 8 criteria passed\n",
                failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                8 - failures);
    return failures == 0 ? 0 : 1;
}
