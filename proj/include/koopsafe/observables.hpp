#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "koopsafe/common.hpp"

namespace koopsafe {

// Rank cutoff used when pseudo-inverting the lifted Jacobian: singular
// values below kRankTol * sigma_max are treated as zero.
inline constexpr double kRankTol = 1e-10;

// One scalar observable over the state. Three families are enough for
// every scenario here: the constant function, single-state sinusoids
// sqrt(2)cos(n pi z_j) / sqrt(2)sin(n pi z_j), and monomials.
struct BasisFunction {
    enum class Kind { Constant, Cos, Sin, Monomial };

    Kind kind = Kind::Constant;
    int state = 0;     // sinusoids: which state the function depends on
    int harmonic = 1;  // sinusoids: n in n*pi*z
    Eigen::VectorXi exponents;  // monomials: per-state exponent

    double value(const Vector& x) const {
        switch (kind) {
            case Kind::Constant:
                return 1.0;
            case Kind::Cos:
                return kSqrt2 * std::cos(harmonic * kPi * x(state));
            case Kind::Sin:
                return kSqrt2 * std::sin(harmonic * kPi * x(state));
            case Kind::Monomial: {
                double p = 1.0;
                for (int i = 0; i < exponents.size(); ++i)
                    for (int e = 0; e < exponents(i); ++e) p *= x(i);
                return p;
            }
        }
        return 0.0;
    }

    Vector gradient(const Vector& x) const {
        Vector out = Vector::Zero(x.size());
        switch (kind) {
            case Kind::Constant:
                break;
            case Kind::Cos:
                out(state) = -kSqrt2 * harmonic * kPi *
                             std::sin(harmonic * kPi * x(state));
                break;
            case Kind::Sin:
                out(state) = kSqrt2 * harmonic * kPi *
                             std::cos(harmonic * kPi * x(state));
                break;
            case Kind::Monomial:
                for (int j = 0; j < exponents.size(); ++j) {
                    if (exponents(j) == 0) continue;
                    double p = static_cast<double>(exponents(j));
                    for (int i = 0; i < exponents.size(); ++i) {
                        const int e = exponents(i) - (i == j ? 1 : 0);
                        for (int k = 0; k < e; ++k) p *= x(i);
                    }
                    out(j) = p;
                }
                break;
        }
        return out;
    }
};

// Ordered family of N scalar observables over an n-dimensional state.
// Immutable after construction; safe to share across threads.
class BasisSet {
public:
    // Sinusoid family: optional constant, then for each requested state
    // (in index order) and each harmonic n (ascending) the pair
    // sqrt(2)cos(n pi z), sqrt(2)sin(n pi z). The ordering is fixed so
    // generator-vector indices are reproducible across runs.
    static BasisSet sinusoids(const std::set<int>& harmonics,
                              const std::vector<int>& states, int state_dim,
                              bool include_constant = true) {
        if (harmonics.empty())
            throw ConfigError("sinusoid basis: empty harmonic set");
        for (int n : harmonics)
            if (n < 1)
                throw ConfigError(
                    format_msg("sinusoid basis: harmonic ", n, " < 1"));
        std::vector<BasisFunction> fns;
        if (include_constant) fns.push_back({BasisFunction::Kind::Constant});
        for (int s : states) {
            if (s < 0 || s >= state_dim)
                throw ConfigError(format_msg("sinusoid basis: state index ", s,
                                             " out of range for n=", state_dim));
            for (int n : harmonics) {
                fns.push_back({BasisFunction::Kind::Cos, s, n});
                fns.push_back({BasisFunction::Kind::Sin, s, n});
            }
        }
        return BasisSet(state_dim, include_constant, std::move(fns));
    }

    // Monomial family: all monomials of total degree <= max_degree in the
    // selected states, graded lexicographic, constant (degree 0) first.
    static BasisSet monomials(int state_dim, int max_degree,
                              std::vector<int> states = {}) {
        if (max_degree < 1) throw ConfigError("monomial basis: degree < 1");
        if (states.empty())
            for (int i = 0; i < state_dim; ++i) states.push_back(i);
        for (int s : states)
            if (s < 0 || s >= state_dim)
                throw ConfigError(format_msg("monomial basis: state index ", s,
                                             " out of range for n=", state_dim));
        std::vector<BasisFunction> fns;
        std::vector<Eigen::VectorXi> level{Eigen::VectorXi::Zero(state_dim)};
        fns.push_back({BasisFunction::Kind::Monomial, 0, 1, level[0]});
        // Graded order: degree 1, 2, ...; within a degree, earlier states
        // carry higher exponents first (x^2 before x*y before y^2).
        for (int d = 1; d <= max_degree; ++d) {
            std::vector<Eigen::VectorXi> next;
            for (const auto& e : level)
                for (int s : states) {
                    Eigen::VectorXi e2 = e;
                    e2(s) += 1;
                    next.push_back(e2);
                }
            std::sort(next.begin(), next.end(),
                      [](const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
                          return std::lexicographical_compare(
                              b.data(), b.data() + b.size(), a.data(),
                              a.data() + a.size());
                      });
            next.erase(std::unique(next.begin(), next.end(),
                                   [](const Eigen::VectorXi& a,
                                      const Eigen::VectorXi& b) {
                                       return a == b;
                                   }),
                       next.end());
            for (const auto& e : next)
                fns.push_back({BasisFunction::Kind::Monomial, 0, 1, e});
            level = std::move(next);
        }
        return BasisSet(state_dim, true, std::move(fns));
    }

    int state_dim() const { return n_; }
    int size() const { return static_cast<int>(functions_.size()); }
    bool includes_constant() const { return includes_constant_; }
    const std::vector<BasisFunction>& functions() const { return functions_; }

    Vector psi(const Vector& x) const {
        check_state(x);
        Vector out(size());
        for (int i = 0; i < size(); ++i) out(i) = functions_[i].value(x);
        return out;
    }

    Matrix jacobian(const Vector& x) const {
        check_state(x);
        Matrix out(size(), n_);
        for (int i = 0; i < size(); ++i)
            out.row(i) = functions_[i].gradient(x).transpose();
        return out;
    }

private:
    BasisSet(int n, bool includes_constant, std::vector<BasisFunction> fns)
        : n_(n), includes_constant_(includes_constant),
          functions_(std::move(fns)) {
        if (size() <= n_)
            throw ConfigError(format_msg("basis too small: N=", size(),
                                         " must exceed state dimension n=", n_));
    }

    void check_state(const Vector& x) const {
        if (x.size() != n_)
            throw DimensionError(format_msg("state has dimension ", x.size(),
                                            ", basis expects ", n_));
        if (!x.allFinite()) throw DimensionError("state has non-finite entries");
    }

    int n_;
    bool includes_constant_;
    std::vector<BasisFunction> functions_;
};

// psi(x), its Jacobian, and the pieces of the lifted-frame algebra that
// the estimator consumes every step.
struct LiftedFrame {
    Vector psi;       // N
    Matrix jac;       // N x n
    Matrix jac_pinv;  // n x N
    double sigma_min_jac = 0.0;
    double sigma_max_jac = 0.0;

    int basis_size() const { return static_cast<int>(psi.size()); }
    int state_dim() const { return static_cast<int>(jac.cols()); }
};

inline LiftedFrame lift(const BasisSet& basis, const Vector& x) {
    LiftedFrame f;
    f.psi = basis.psi(x);
    f.jac = basis.jacobian(x);

    Eigen::JacobiSVD<Matrix> svd(f.jac,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    f.sigma_max_jac = sv(0);
    f.sigma_min_jac = sv(sv.size() - 1);
    const double cutoff = kRankTol * f.sigma_max_jac;
    if (f.sigma_min_jac <= cutoff)
        throw DegenerateLiftingError(format_msg(
            "lifted Jacobian is column-rank deficient: singular value ",
            f.sigma_min_jac, " below cutoff ", cutoff));
    Vector inv_sv = sv.cwiseInverse();
    f.jac_pinv = svd.matrixV() * inv_sv.asDiagonal() *
                 svd.matrixU().transpose();
    return f;
}

// Psi(x) lambda without materializing the N x N^2 block matrix: entry k
// is psi . block_k(lambda), i.e. (L^T psi)_k for lambda = vec of columns
// of L.
inline Vector psi_block_apply(const Vector& psi, const Vector& lambda) {
    const auto N = psi.size();
    if (lambda.size() != N * N)
        throw DimensionError(format_msg("psi_block_apply: lambda has length ",
                                        lambda.size(), ", expected ", N * N));
    Vector out(N);
    for (Eigen::Index k = 0; k < N; ++k)
        out(k) = psi.dot(lambda.segment(k * N, N));
    return out;
}

// Psi^T(x) v: block k of the result is v_k * psi.
inline Vector psi_block_transpose_apply(const Vector& psi, const Vector& v) {
    const auto N = psi.size();
    if (v.size() != N)
        throw DimensionError(
            format_msg("psi_block_transpose_apply: v has length ", v.size(),
                       ", expected ", N));
    Vector out(N * N);
    for (Eigen::Index k = 0; k < N; ++k) out.segment(k * N, N) = v(k) * psi;
    return out;
}

// All nonzero singular values of the block matrix Psi(x) coincide with
// |psi(x)|_2 (the rows are mutually orthogonal with equal norm), so the
// pair (sigma_max, smallest nonzero sigma) is (|psi|, |psi|). Used to
// certify the lower bound s at runtime.
inline std::pair<double, double> psi_singular_values(const Vector& psi) {
    const double norm = psi.norm();
    return {norm, norm};
}

}  // namespace koopsafe
