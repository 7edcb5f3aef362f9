#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "macroqed/error.hpp"
#include "macroqed/fourport.hpp"
#include "macroqed/numerics/simplex.hpp"
#include "macroqed/numerics/special.hpp"

namespace macroqed {

using MatXc = Eigen::MatrixXcd;
using VecXc = Eigen::VectorXcd;

// Density matrix on a product of truncated Fock spaces. Basis index is row-major in
// the occupation numbers (last mode fastest).
struct FockDensity {
    std::vector<int> mode_dims;
    MatXc matrix;

    int dimension() const {
        int d = 1;
        for (int m : mode_dims) d *= m;
        return d;
    }
    int index(const std::vector<int>& occ) const {
        int idx = 0;
        for (std::size_t i = 0; i < mode_dims.size(); ++i) idx = idx * mode_dims[i] + occ[i];
        return idx;
    }
    cplx trace() const { return matrix.trace(); }
    double hermiticity_defect() const { return (matrix - matrix.adjoint()).norm(); }
    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<MatXc> es(0.5 * (matrix + matrix.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
    double purity() const { return (matrix * matrix).trace().real(); }

    void validate(double trace_tol = 1e-10) const {
        if (matrix.rows() != dimension() || matrix.cols() != dimension())
            throw ValidationError("density matrix size does not match the mode truncation");
        if (hermiticity_defect() > 1e-12 * std::max(1.0, matrix.norm()))
            throw ValidationError("density matrix is not Hermitian");
        if (std::abs(trace() - 1.0) > trace_tol) throw ValidationError("density matrix trace differs from one");
        if (min_eigenvalue() < -1e-10) throw ValidationError("density matrix is not positive semidefinite");
    }
};

enum class BellKind { psi_plus, psi_minus, phi_plus, phi_minus };

inline bool is_psi(BellKind k) { return k == BellKind::psi_plus || k == BellKind::psi_minus; }
inline double bell_sign(BellKind k) {
    return (k == BellKind::psi_plus || k == BellKind::phi_plus) ? 1.0 : -1.0;
}

// ---------------------------------------------------------------- closed-form outputs

// Outgoing coherent amplitudes of the two field modes: c' = T c + A d.
inline Eigen::Vector2cd coherent_output(const FourPortMatrices& fm, const Eigen::Vector2cd& c,
                                        const Eigen::Vector2cd& d) {
    return fm.T * c + fm.A * d;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    double b = 1;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
}

// Single-mode output of an n-photon Fock input, t2 = |T_j1|^2.
inline FockDensity fock_loss(int n, double t2) {
    if (n < 0) throw DomainError("photon number must be non-negative");
    if (!(t2 >= 0 && t2 <= 1)) throw DomainError("transmission probability must lie in [0, 1]");
    FockDensity out{{n + 1}, MatXc::Zero(n + 1, n + 1)};
    for (int k = 0; k <= n; ++k)
        out.matrix(k, k) = binomial(n, k) * std::pow(t2, k) * std::pow(1 - t2, n - k);
    return out;
}

inline int cat_cutoff(cplx gamma) {
    const double a = std::abs(gamma);
    return static_cast<int>(std::ceil(a * a + 8 * a + 10));
}

// Fock amplitudes <k|alpha>, k = 0..cutoff
inline VecXc coherent_amplitudes(cplx alpha, int cutoff) {
    VecXc v(cutoff + 1);
    v[0] = std::exp(-0.5 * std::norm(alpha));
    for (int k = 1; k <= cutoff; ++k) v[k] = v[k - 1] * alpha / std::sqrt(double(k));
    return v;
}

// Single-mode output of the even cat (|g> + |-g>)/sqrt(N) sent through a port with
// amplitude transmission T.
inline FockDensity cat_output(cplx gamma, cplx T, int cutoff = -1) {
    if (std::abs(T) > 1 + 1e-12) throw DomainError("|T| must not exceed 1");
    if (cutoff < 0) cutoff = cat_cutoff(gamma);
    const double g2 = std::norm(gamma);
    const double N = 2 * (1 + std::exp(-2 * g2));
    const double w = std::exp(-2 * g2 * (1 - std::norm(T)));
    const VecXc p = coherent_amplitudes(gamma * T, cutoff), m = coherent_amplitudes(-gamma * T, cutoff);
    FockDensity out{{cutoff + 1}, MatXc()};
    out.matrix = (p * p.adjoint() + m * m.adjoint() + w * (p * m.adjoint() + m * p.adjoint())) / N;
    return out;
}

inline double cat_coherence_weight(cplx gamma, cplx T) {
    return std::exp(-2 * std::norm(gamma) * (1 - std::norm(T)));
}

// Two-mode output (each mode restricted to {|0>, |1>}) of a Bell input whose modes pass
// through devices with transmissions T1 and T2.
inline FockDensity bell_output(BellKind kind, cplx T1, cplx T2) {
    if (std::abs(T1) > 1 + 1e-12 || std::abs(T2) > 1 + 1e-12)
        throw DomainError("|T| must not exceed 1");
    const double s = bell_sign(kind);
    const double a1 = std::norm(T1), a2 = std::norm(T2);
    FockDensity out{{2, 2}, MatXc::Zero(4, 4)};
    Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
    if (is_psi(kind)) {
        out.matrix(0, 0) = 0.5 * (2 - a1 - a2);
        v[1] = T2;      // |01>
        v[2] = s * T1;  // |10>
    } else {
        out.matrix(0, 0) = 0.5 * (1 - a1) * (1 - a2);
        out.matrix(2, 2) = 0.5 * a1 * (1 - a2);
        out.matrix(1, 1) = 0.5 * a2 * (1 - a1);
        v[0] = 1;
        v[3] = s * T1 * T2;
    }
    out.matrix += 0.5 * v * v.adjoint();
    return out;
}

inline double entanglement_bounds(BellKind kind, cplx T) {
    const double t2 = std::norm(T);
    if (t2 > 1 + 1e-12) throw DomainError("|T| must not exceed 1");
    if (is_psi(kind)) return t2 * std::numbers::ln2;
    const double t4 = t2 * t2;
    const double xlx = t4 > 0 ? t4 * std::log(t4) : 0.0;
    return 0.5 * ((1 + t4) * std::log1p(t4) - xlx);
}

// ---------------------------------------------------------------- phase space

// s-parametrized phase-space function of a single-mode state (s = 0: Wigner,
// s = -1: Husimi). Requires s < 1.
inline double wigner_s(const FockDensity& rho, cplx alpha, double s = 0, Diagnostics* diag = nullptr) {
    if (rho.mode_dims.size() != 1) throw DomainError("wigner_s expects a single-mode state");
    if (!(s < 1)) throw DomainError("phase-space function is singular for s >= 1");
    if (s > 0 && diag) diag->warn("s > 0 phase-space function may be irregular");
    const int d = rho.mode_dims[0];
    const double a2 = std::norm(alpha);
    const double q = 1 - s;
    const double ratio = (s + 1) / (s - 1);
    const double y = 4 * a2 / (q * q);  // -ratio times the Laguerre argument 4|alpha|^2/(1 - s^2)
    const double env = 2 / (std::numbers::pi * q) * std::exp(-2 * a2 / q);
    // ratio^n L_n^k(4|alpha|^2/(1 - s^2)) by the Laguerre recurrence scaled with ratio,
    // finite at s = -1 where the argument diverges and ratio vanishes.
    auto scaled_laguerre = [&](int n, int k) {
        double prev = 1, cur = (1 + k) * ratio + y;
        if (n == 0) return prev;
        for (int j = 1; j < n; ++j) {
            const double next = (((2 * j + k + 1) * ratio + y) * cur - (j + k) * ratio * ratio * prev) / (j + 1);
            prev = cur;
            cur = next;
        }
        return cur;
    };
    // Element of |m><n| for m >= n; the m < n element is its conjugate.
    auto elem = [&](int m, int n) {
        double lf = 0;  // ln sqrt(n!/m!)
        for (int k = n + 1; k <= m; ++k) lf -= 0.5 * std::log(double(k));
        const cplx pw = std::pow(2.0 * std::conj(alpha) / q, m - n);
        return env * std::exp(lf) * pw * scaled_laguerre(n, m - n);
    };
    // rho = sum rho_mn |m><n|
    cplx w = 0;
    for (int m = 0; m < d; ++m)
        for (int n = 0; n <= m; ++n) {
            const cplx e = elem(m, n);
            w += rho.matrix(m, n) * e;
            if (m != n) w += rho.matrix(n, m) * std::conj(e);
        }
    return w.real();
}

// ---------------------------------------------------------------- mode-mixing oracle

using Occupation4 = std::array<int, 4>;
using FockState4 = std::map<Occupation4, cplx>;

inline double factorial(int n) {
    double f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

// Applies the number-conserving unitary induced by Lambda (a_i^dagger -> sum_j
// Lambda_ji a_j^dagger) to a pure four-mode state and traces out modes 3 and 4.
// The field modes of the result are truncated at `cutoff` photons.
inline FockDensity mode_mix_oracle(const FockState4& psi_in, const Mat4c& Lambda, int cutoff) {
    if ((Lambda * Lambda.adjoint() - Mat4c::Identity()).norm() > 1e-8)
        throw DomainError("Lambda must be unitary");
    FockState4 out;
    for (const auto& [occ, amp] : psi_in) {
        int total = 0;
        for (int k : occ) {
            if (k < 0) throw DomainError("negative occupation number");
            total += k;
        }
        if (total > cutoff) throw DomainError("input photon number exceeds the output truncation");
        if (amp == cplx(0)) continue;
        // polynomial in the output creation operators, monomial exponents -> coefficient
        FockState4 poly{{Occupation4{0, 0, 0, 0}, amp}};
        double norm = 1;
        for (int i = 0; i < 4; ++i) {
            norm *= factorial(occ[i]);
            for (int rep = 0; rep < occ[i]; ++rep) {
                FockState4 next;
                for (const auto& [mono, coef] : poly)
                    for (int j = 0; j < 4; ++j) {
                        if (Lambda(j, i) == cplx(0)) continue;
                        Occupation4 m2 = mono;
                        ++m2[j];
                        next[m2] += coef * Lambda(j, i);
                    }
                poly.swap(next);
            }
        }
        const double inv = 1 / std::sqrt(norm);
        for (const auto& [mono, coef] : poly) {
            double f = 1;
            for (int k : mono) f *= factorial(k);
            out[mono] += coef * inv * std::sqrt(f);
        }
    }
    // Partial trace over the device modes.
    const int d = cutoff + 1;
    FockDensity rho{{d, d}, MatXc::Zero(d * d, d * d)};
    std::map<std::pair<int, int>, std::vector<std::pair<int, cplx>>> by_device;
    for (const auto& [occ, amp] : out)
        by_device[{occ[2], occ[3]}].push_back({occ[0] * d + occ[1], amp});
    for (const auto& [dev, vec] : by_device)
        for (const auto& [i, ai] : vec)
            for (const auto& [j, aj] : vec) rho.matrix(i, j) += ai * std::conj(aj);
    return rho;
}

// Marginal of one mode of a two-mode density.
inline FockDensity reduce_to_mode(const FockDensity& rho, int keep) {
    if (rho.mode_dims.size() != 2) throw DomainError("reduce_to_mode expects a two-mode state");
    const int d0 = rho.mode_dims[0], d1 = rho.mode_dims[1];
    const int dk = keep == 0 ? d0 : d1;
    FockDensity out{{dk}, MatXc::Zero(dk, dk)};
    for (int a = 0; a < d0; ++a)
        for (int b = 0; b < d1; ++b)
            for (int a2 = 0; a2 < d0; ++a2)
                for (int b2 = 0; b2 < d1; ++b2) {
                    const bool traced_equal = keep == 0 ? (b == b2) : (a == a2);
                    if (!traced_equal) continue;
                    const int r = keep == 0 ? a : b, c = keep == 0 ? a2 : b2;
                    out.matrix(r, c) += rho.matrix(a * d1 + b, a2 * d1 + b2);
                }
    return out;
}

// ---------------------------------------------------------------- entanglement

// Tr[rho (ln rho - ln sigma)]; +infinity when supp(rho) is not inside supp(sigma).
inline double relative_entropy(const MatXc& rho, const MatXc& sigma) {
    constexpr double cut = 1e-14;
    Eigen::SelfAdjointEigenSolver<MatXc> er(0.5 * (rho + rho.adjoint()));
    Eigen::SelfAdjointEigenSolver<MatXc> es(0.5 * (sigma + sigma.adjoint()));
    double s = 0;
    for (int i = 0; i < er.eigenvalues().size(); ++i) {
        const double p = er.eigenvalues()[i];
        if (p > cut) s += p * std::log(p);
    }
    const MatXc& V = es.eigenvectors();
    const MatXc proj = V.adjoint() * rho * V;  // rho in the eigenbasis of sigma
    double cross = 0;
    for (int k = 0; k < es.eigenvalues().size(); ++k) {
        const double w = proj(k, k).real();
        const double q = es.eigenvalues()[k];
        if (q > cut) cross += w * std::log(q);
        else if (w > cut) return std::numeric_limits<double>::infinity();
    }
    return std::max(0.0, s - cross);
}

inline double relative_entropy(const FockDensity& rho, const FockDensity& sigma) {
    if (rho.mode_dims != sigma.mode_dims) throw DomainError("states live on different spaces");
    return relative_entropy(rho.matrix, sigma.matrix);
}

struct EntanglementOptions {
    int terms = 8;            // product states in the separable mixture
    int restarts = 20;        // independent simplex runs
    std::uint64_t seed = 20240917;
    double tolerance = 1e-5;  // target accuracy in E
    int max_evaluations = 60000;
};

struct EntanglementResult {
    double value = 0;
    bool converged = false;
    double achieved_tolerance = 0;  // improvement made by the last polishing pass
    int evaluations = 0;
};

namespace detail {

inline Eigen::Vector2cd qubit(double theta, double phi) {
    return {std::cos(0.5 * theta), std::polar(std::sin(0.5 * theta), phi)};
}

// sigma(x) = sum_i p_i |a_i><a_i| (x) |b_i><b_i|, x = (w_1..w_K, th_a, ph_a, th_b, ph_b, ...)
inline Eigen::Matrix4cd separable_state(const Eigen::VectorXd& x, int K) {
    const double wmax = x.head(K).maxCoeff();
    Eigen::VectorXd p = (x.head(K).array() - wmax).exp();
    p /= p.sum();
    Eigen::Matrix4cd sigma = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < K; ++i) {
        const auto a = qubit(x[K + 4 * i], x[K + 4 * i + 1]);
        const auto b = qubit(x[K + 4 * i + 2], x[K + 4 * i + 3]);
        Eigen::Vector4cd ab;
        ab << a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1];
        sigma += p[i] * ab * ab.adjoint();
    }
    return sigma;
}

inline void angles_of(const Eigen::Vector2cd& v, double& theta, double& phi) {
    const Eigen::Vector2cd u = v / v.norm();
    theta = 2 * std::atan2(std::abs(u[1]), std::abs(u[0]));
    phi = std::arg(u[1]) - std::arg(u[0]);
}

}  // namespace detail

// Relative entropy of entanglement of a two-qubit state: minimum of S(rho || sigma) over
// mixtures of `terms` product states, by restarted Nelder-Mead. The first two starts are
// the product of the marginals and the dephased state; the rest are random. The result is
// an upper bound on the true value since every candidate sigma is separable.
inline EntanglementResult entanglement_re(const FockDensity& rho, const EntanglementOptions& opt = {}) {
    if (rho.mode_dims != std::vector<int>{2, 2}) throw DomainError("entanglement_re expects a two-qubit state");
    if (opt.terms < 4 || opt.restarts < 1) throw ValidationError("need at least 4 terms and one restart");
    const int K = opt.terms, dim = 5 * K;
    const Eigen::Matrix4cd r = 0.5 * (rho.matrix + rho.matrix.adjoint());

    // Precompute -S(rho) once; the objective only needs Tr rho ln sigma.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> er(r);
    double neg_entropy = 0;
    for (int i = 0; i < 4; ++i) {
        const double p = er.eigenvalues()[i];
        if (p > 1e-14) neg_entropy += p * std::log(p);
    }
    int evals = 0;
    auto objective = [&](const Eigen::VectorXd& x) {
        ++evals;
        const Eigen::Matrix4cd sigma = detail::separable_state(x, K);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(sigma);
        const Eigen::Matrix4cd proj = es.eigenvectors().adjoint() * r * es.eigenvectors();
        double cross = 0;
        for (int k = 0; k < 4; ++k) {
            const double w = proj(k, k).real(), q = es.eigenvalues()[k];
            if (q > 1e-300) cross += w * std::log(q);
            else if (w > 1e-14) return std::numeric_limits<double>::infinity();
        }
        return neg_entropy - cross;
    };

    // Structured starting points.
    auto start_from = [&](const std::vector<std::pair<double, std::pair<Eigen::Vector2cd, Eigen::Vector2cd>>>& terms) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < K; ++i) x[i] = -30;
        for (int i = 0; i < K; ++i) {
            x[K + 4 * i] = 0.3 + 0.37 * i;
            x[K + 4 * i + 2] = 2.8 - 0.29 * i;
        }
        for (std::size_t i = 0; i < terms.size() && static_cast<int>(i) < K; ++i) {
            x[i] = std::log(std::max(terms[i].first, 1e-13));
            detail::angles_of(terms[i].second.first, x[K + 4 * i], x[K + 4 * i + 1]);
            detail::angles_of(terms[i].second.second, x[K + 4 * i + 2], x[K + 4 * i + 3]);
        }
        return x;
    };
    Eigen::Matrix2cd ra = Eigen::Matrix2cd::Zero(), rb = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                ra(i, j) += r(2 * i + k, 2 * j + k);
                rb(i, j) += r(2 * k + i, 2 * k + j);
            }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> ea(ra), eb(rb);
    std::vector<std::pair<double, std::pair<Eigen::Vector2cd, Eigen::Vector2cd>>> marg, deph;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            marg.push_back({std::max(ea.eigenvalues()[i], 0.0) * std::max(eb.eigenvalues()[j], 0.0),
                            {ea.eigenvectors().col(i), eb.eigenvectors().col(j)}});
            deph.push_back({r(2 * i + j, 2 * i + j).real(),
                            {Eigen::Vector2cd::Unit(i), Eigen::Vector2cd::Unit(j)}});
        }

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uw(-1, 1), uth(0, std::numbers::pi), uph(0, 2 * std::numbers::pi);
    numerics::SimplexOptions so;
    so.f_tol = 1e-14;
    so.x_tol = 1e-10;
    so.max_evaluations = opt.max_evaluations;

    // Screening: every start gets a bounded simplex run, then the incumbent is polished by
    // re-seeding the simplex around it until it stops improving.
    EntanglementResult best;
    best.value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x;
    for (int rs = 0; rs < opt.restarts; ++rs) {
        Eigen::VectorXd x0;
        if (rs == 0) x0 = start_from(marg);
        else if (rs == 1) x0 = start_from(deph);
        else {
            x0.resize(dim);
            for (int i = 0; i < K; ++i) x0[i] = uw(rng);
            for (int i = 0; i < K; ++i) {
                x0[K + 4 * i] = uth(rng);
                x0[K + 4 * i + 1] = uph(rng);
                x0[K + 4 * i + 2] = uth(rng);
                x0[K + 4 * i + 3] = uph(rng);
            }
        }
        so.initial_step = 0.5;
        so.max_evaluations = std::max(1, opt.max_evaluations / 4);
        auto res = numerics::nelder_mead(objective, x0, so);
        if (res.value < best.value) {
            best.value = res.value;
            best_x = res.x;
        }
    }
    so.max_evaluations = opt.max_evaluations;
    double last_gain = std::numeric_limits<double>::infinity();
    bool settled = false;  // the last simplex run met its own tolerances within budget
    for (int polish = 0; polish < 12 && std::isfinite(best.value); ++polish) {
        so.initial_step = polish < 4 ? 0.1 : (polish < 8 ? 0.02 : 0.004);
        auto again = numerics::nelder_mead(objective, best_x, so);
        last_gain = best.value - again.value;
        settled = again.converged;
        if (again.value < best.value) {
            best.value = again.value;
            best_x = again.x;
        }
        if (last_gain < 1e-3 * opt.tolerance * std::max(best.value, 1e-8)) break;
    }
    best.achieved_tolerance = std::max(last_gain, 0.0);
    best.value = std::max(best.value, 0.0);
    best.evaluations = evals;
    best.converged = std::isfinite(best.value) && settled && best.achieved_tolerance <= opt.tolerance;
    return best;
}

}  // namespace macroqed
