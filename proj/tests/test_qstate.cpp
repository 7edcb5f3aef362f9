#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "macroqed/qstate.hpp"
#include "oracles/bell_ree.hpp"

using namespace macroqed;

namespace {

constexpr double pi = std::numbers::pi;

// Each input mode i in {1, 2} leaks into its own device mode i + 2.
Mat4c two_lossy_lines(cplx T1, cplx T2) {
    const double r1 = std::sqrt(1 - std::norm(T1)), r2 = std::sqrt(1 - std::norm(T2));
    Mat4c L = Mat4c::Zero();
    L(0, 0) = T1, L(2, 0) = r1, L(0, 2) = -r1, L(2, 2) = std::conj(T1);
    L(1, 1) = T2, L(3, 1) = r2, L(1, 3) = -r2, L(3, 3) = std::conj(T2);
    return L;
}

FockState4 bell_input(BellKind k) {
    const double s = bell_sign(k), h = std::sqrt(0.5);
    if (is_psi(k)) return {{{0, 1, 0, 0}, h}, {{1, 0, 0, 0}, s * h}};
    return {{{0, 0, 0, 0}, h}, {{1, 1, 0, 0}, s * h}};
}

// Bell-family output restricted to {0, 1} per mode from an oracle density with a larger cutoff
MatXc qubit_block(const FockDensity& rho) {
    const int d = rho.mode_dims[1];
    const int idx[4] = {0, 1, d, d + 1};
    MatXc out(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out(i, j) = rho.matrix(idx[i], idx[j]);
    return out;
}

}  // namespace

TEST(FockLoss, BinomialDistribution) {
    for (int n : {0, 1, 5, 20})
        for (double t2 : {0.0, 0.37, 1.0}) {
            const auto rho = fock_loss(n, t2);
            EXPECT_NO_THROW(rho.validate());
            double mean = 0;
            for (int k = 0; k <= n; ++k) mean += k * rho.matrix(k, k).real();
            EXPECT_NEAR(mean, n * t2, 1e-12);
        }
    EXPECT_THROW(fock_loss(-1, 0.5), DomainError);
    EXPECT_THROW(fock_loss(2, 1.5), DomainError);
}

TEST(FockLoss, MatchesModeMixing) {
    const cplx T(0.6, -0.3);
    const int n = 4;
    const auto rho = mode_mix_oracle({{{n, 0, 0, 0}, 1.0}}, two_lossy_lines(T, 1.0), n);
    const auto mode1 = reduce_to_mode(rho, 0);
    EXPECT_LT((mode1.matrix - fock_loss(n, std::norm(T)).matrix).norm(), 1e-12);
}

TEST(Cat, TraceAndLimits) {
    const cplx g(1.3, 0.4);
    for (double t : {0.0, 0.5, 0.9, 1.0}) {
        const auto rho = cat_output(g, t);
        EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
        EXPECT_GT(rho.min_eigenvalue(), -1e-12);
    }
    EXPECT_NEAR(cat_output(g, 1.0).purity(), 1.0, 1e-10);
    EXPECT_NEAR(cat_output(g, 0.0).matrix(0, 0).real(), 1.0, 1e-12);
    EXPECT_NEAR(cat_coherence_weight(g, 1.0), 1.0, 0.0);
    EXPECT_NEAR(cat_coherence_weight(g, 0.5), std::exp(-2 * std::norm(g) * 0.75), 1e-15);
    EXPECT_THROW(cat_output(g, 1.1), DomainError);
}

TEST(Cat, MatchesModeMixingOfTruncatedInput) {
    const cplx g(1.0, 0.2), T(0.7, 0.2);
    const int cut = 30;
    const VecXc p = coherent_amplitudes(g, cut), m = coherent_amplitudes(-g, cut);
    const VecXc cat = (p + m).normalized();
    FockState4 in;
    for (int k = 0; k <= cut; ++k)
        if (std::abs(cat[k]) > 0) in[{k, 0, 0, 0}] = cat[k];
    const auto rho = reduce_to_mode(mode_mix_oracle(in, two_lossy_lines(T, 1.0), cut), 0);
    EXPECT_LT((rho.matrix - cat_output(g, T, cut).matrix).norm(), 1e-10);
}

TEST(Cat, CoherenceDecaysFasterThanAmplitude) {
    const cplx g(2.0, 0.0);
    for (double t : {0.95, 0.8, 0.5})
        EXPECT_LT(cat_coherence_weight(g, t), std::norm(cplx(t)));
}

TEST(Bell, ValidOutputsAndLosslessLimit) {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (auto k : {BellKind::psi_plus, BellKind::psi_minus, BellKind::phi_plus, BellKind::phi_minus}) {
        for (int i = 0; i < 20; ++i) EXPECT_NO_THROW(bell_output(k, cplx(u(rng), u(rng)), cplx(u(rng), u(rng))).validate());
        EXPECT_NEAR(bell_output(k, 1.0, cplx(0, 1)).purity(), 1.0, 1e-14);
    }
    EXPECT_THROW(bell_output(BellKind::psi_plus, 1.2, 0.5), DomainError);
}

TEST(Bell, MatchesModeMixing) {
    const cplx T1(0.5, 0.6), T2(-0.3, 0.8);
    for (auto k : {BellKind::psi_plus, BellKind::psi_minus, BellKind::phi_plus, BellKind::phi_minus}) {
        const auto rho = mode_mix_oracle(bell_input(k), two_lossy_lines(T1, T2), 2);
        EXPECT_NEAR(qubit_block(rho).trace().real(), 1.0, 1e-14);
        EXPECT_LT((qubit_block(rho) - bell_output(k, T1, T2).matrix).norm(), 1e-14);
    }
}

TEST(ModeMix, ConservesPhotonNumberAndTrace) {
    std::mt19937 rng(4);
    std::normal_distribution<double> g;
    Mat4c X;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) X(i, j) = cplx(g(rng), g(rng));
    const Mat4c U = Eigen::HouseholderQR<Mat4c>(X).householderQ();
    // no light leaks into modes 3, 4 only if U is block diagonal; here it does
    const auto rho = mode_mix_oracle({{{1, 2, 0, 0}, 1.0}}, U, 3);
    EXPECT_NO_THROW(rho.validate(1.0));
    EXPECT_LE(rho.trace().real(), 1.0 + 1e-12);
    // with block-diagonal mixing nothing is traced out
    Mat4c B = Mat4c::Identity();
    B.topLeftCorner(2, 2) = U.topLeftCorner(2, 2).householderQr().householderQ();
    const auto rb = mode_mix_oracle({{{1, 2, 0, 0}, 1.0}}, B, 3);
    EXPECT_NEAR(rb.trace().real(), 1.0, 1e-12);
    EXPECT_NEAR(rb.purity(), 1.0, 1e-12);
    double n = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) n += (a + b) * rb.matrix(a * 4 + b, a * 4 + b).real();
    EXPECT_NEAR(n, 3.0, 1e-12);
}

TEST(ModeMix, RejectsBadInput) {
    EXPECT_THROW(mode_mix_oracle({{{1, 0, 0, 0}, 1.0}}, Mat4c::Identity() * 2.0, 1), DomainError);
    EXPECT_THROW(mode_mix_oracle({{{2, 1, 0, 0}, 1.0}}, Mat4c::Identity(), 2), DomainError);
}

TEST(Wigner, VacuumAndSinglePhoton) {
    FockDensity vac{{3}, MatXc::Zero(3, 3)};
    vac.matrix(0, 0) = 1;
    EXPECT_NEAR(wigner_s(vac, 0.0), 2 / pi, 1e-15);
    const auto one = fock_loss(1, 1.0);
    EXPECT_NEAR(wigner_s(one, 0.0), -2 / pi, 1e-15);
    for (double s : {-1.0, -0.5, 0.5})
        EXPECT_NEAR(wigner_s(one, 0.0, s), 2 / (pi * (1 - s)) * (s + 1) / (s - 1), 1e-14);
}

TEST(Wigner, CoherentStateGaussian) {
    const cplx beta(0.7, -0.4);
    const VecXc v = coherent_amplitudes(beta, 40);
    FockDensity rho{{41}, v * v.adjoint()};
    for (double s : {-1.0, -0.5, 0.0, 0.5})
        for (cplx a : {cplx(0, 0), cplx(0.3, 0.2), cplx(-0.5, 1.0)}) {
            const double ref = 2 / (pi * (1 - s)) * std::exp(-2 * std::norm(a - beta) / (1 - s));
            EXPECT_NEAR(wigner_s(rho, a, s), ref, 1e-12) << s << " " << a;
        }
}

TEST(Wigner, NormalizedForLossyCat) {
    const auto rho = cat_output(cplx(1.5, 0), 0.8);
    const double h = 0.05;
    double sum = 0;
    for (double x = -6; x <= 6; x += h)
        for (double y = -6; y <= 6; y += h) sum += wigner_s(rho, cplx(x, y));
    EXPECT_NEAR(sum * h * h, 1.0, 1e-8);
}

TEST(Wigner, ParameterChecks) {
    const auto one = fock_loss(1, 1.0);
    EXPECT_THROW(wigner_s(one, 0.0, 1.0), DomainError);
    EXPECT_THROW(wigner_s(bell_output(BellKind::phi_plus, 1.0, 1.0), 0.0), DomainError);
    Diagnostics d;
    wigner_s(one, 0.0, 0.3, &d);
    EXPECT_EQ(d.warnings.size(), 1u);
}

TEST(RelativeEntropy, DiagonalAndSupport) {
    MatXc p = MatXc::Zero(3, 3), q = MatXc::Zero(3, 3);
    p.diagonal() << 0.5, 0.3, 0.2;
    q.diagonal() << 0.2, 0.2, 0.6;
    const double ref = 0.5 * std::log(2.5) + 0.3 * std::log(1.5) + 0.2 * std::log(1.0 / 3);
    EXPECT_NEAR(relative_entropy(p, q), ref, 1e-14);
    EXPECT_NEAR(relative_entropy(p, p), 0.0, 1e-14);
    q.diagonal() << 0.5, 0.5, 0.0;
    EXPECT_TRUE(std::isinf(relative_entropy(p, q)));
}

TEST(Bounds, LosslessValueAndMonotone) {
    for (auto k : {BellKind::psi_plus, BellKind::phi_minus}) {
        EXPECT_NEAR(entanglement_bounds(k, 1.0), std::numbers::ln2, 1e-15);
        EXPECT_EQ(entanglement_bounds(k, 0.0), 0.0);
        double prev = 0;
        for (double t = 0.05; t <= 1; t += 0.05) {
            const double b = entanglement_bounds(k, t);
            EXPECT_GT(b, prev);
            prev = b;
        }
    }
    EXPECT_THROW(entanglement_bounds(BellKind::psi_plus, 1.01), DomainError);
}

TEST(Entanglement, PsiFamilyClosedForm) {
    for (double t : {0.3, 0.75, 1.0}) {
        const auto res = entanglement_re(bell_output(BellKind::psi_plus, t, t));
        EXPECT_TRUE(res.converged);
        const double ref = oracle::ree_psi_family(t * t);
        EXPECT_NEAR(res.value, ref, 1e-5 * ref) << t;
        EXPECT_LE(res.value, entanglement_bounds(BellKind::psi_plus, t) + 1e-3);
    }
}

TEST(Entanglement, PhiFamilyAgainstSymmetricReduction) {
    for (double t : {0.4, 0.8}) {
        const double p = t * t;
        const auto res = entanglement_re(bell_output(BellKind::phi_minus, t, t));
        EXPECT_TRUE(res.converged);
        const double ref = oracle::ree_x_symmetric(0.5 * (1 + (1 - p) * (1 - p)), 0.5 * p * (1 - p), 0.5 * p * p, 0.5 * p);
        EXPECT_NEAR(res.value, ref, 1e-5 * ref + 1e-9) << t;
        EXPECT_LE(res.value, entanglement_bounds(BellKind::phi_minus, t) + 1e-3);
    }
}

TEST(Entanglement, ProductStateIsUnentangled) {
    FockDensity prod{{2, 2}, MatXc::Zero(4, 4)};
    prod.matrix(0, 0) = 0.25, prod.matrix(1, 1) = 0.25, prod.matrix(2, 2) = 0.25, prod.matrix(3, 3) = 0.25;
    EntanglementOptions opt;
    opt.restarts = 4;
    EXPECT_NEAR(entanglement_re(prod, opt).value, 0.0, 1e-6);
}

TEST(Entanglement, Deterministic) {
    const auto rho = bell_output(BellKind::phi_plus, 0.6, 0.6);
    EntanglementOptions opt;
    opt.restarts = 4;
    EXPECT_EQ(entanglement_re(rho, opt).value, entanglement_re(rho, opt).value);
}
