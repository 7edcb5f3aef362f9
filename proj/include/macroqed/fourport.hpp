#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "macroqed/error.hpp"
#include "macroqed/media.hpp"
#include "macroqed/numerics/special.hpp"

namespace macroqed {

using Mat2c = Eigen::Matrix2cd;
using Mat4c = Eigen::Matrix4cd;

struct InterfaceCoeffs {
    cplx r, t1, t2;
};

inline InterfaceCoeffs interface_coeffs(cplx n) {
    if (n == cplx(-1)) throw DomainError("interface coefficients undefined for n = -1");
    return {(1.0 - n) / (1.0 + n), 2.0 / (1.0 + n), 2.0 * n / (1.0 + n)};
}

template <DielectricModel M = LorentzMedium>
struct SlabDevice {
    double l = 1;  // thickness in c/omega_T
    M medium{};
    void validate() const {
        if (!(l >= 0)) throw ValidationError("slab thickness must be non-negative");
    }
};

struct FourPortMatrices {
    Mat2c T = Mat2c::Identity();
    Mat2c A = Mat2c::Zero();
    double omega = 1;

    double unitarity_defect() const {
        return (T * T.adjoint() + A * A.adjoint() - Mat2c::Identity()).norm();
    }
};

namespace detail {

// e^{-x} sinh(x)/nI -/+ e^{-x} sin(y)/nR with x = nI ql, y = nR ql, free of the
// cancellation between the two terms for thin or weakly absorbing slabs.
inline double slab_lambda(double nR, double nI, double ql, int sign) {
    const double x = nI * ql, y = nR * ql;
    const double damp = std::exp(-x);
    if (std::max(std::abs(x), std::abs(y)) < 0.5) {
        // sinh(x)/x + sign sin(y)/y as a series in x^2, y^2
        double sum = 1.0 + sign, fact = 1, xp = 1, yp = 1;
        for (int k = 1; k < 12; ++k) {
            fact *= (2 * k) * (2 * k + 1);
            xp *= x * x;
            yp *= -y * y;
            sum += (xp + sign * yp) / fact;
        }
        return damp * ql * sum;
    }
    const double sh = (nI == 0) ? ql * damp * (x == 0 ? 1.0 : std::sinh(x) / x)
                                : -std::expm1(-2 * x) / (2 * nI);
    const double sn = (nR == 0) ? ql : std::sin(y) / nR;
    return sh + sign * damp * sn;
}

}  // namespace detail

inline FourPortMatrices slab_matrices(double l, double omega, cplx n, Diagnostics* diag = nullptr) {
    if (!(omega > 0)) throw DomainError("omega must be positive");
    if (!(l >= 0)) throw DomainError("slab thickness must be non-negative");
    const cplx I(0, 1);
    const double ql = omega * l;
    const double nR = n.real(), nI = n.imag();
    if (nI < 0) throw DomainError("amplifying medium (n_I < 0) has no absorbing-slab input-output relation");
    const auto [r, t1, t2] = interface_coeffs(n);
    const cplx e1 = std::exp(I * n * ql);
    const cplx e2 = e1 * e1;
    const cplx theta = 1.0 / (1.0 - r * r * e2);
    const cplx ph = std::exp(-I * ql);

    FourPortMatrices fm;
    fm.omega = omega;
    fm.T(0, 0) = fm.T(1, 1) = ph * r * (1.0 - t1 * e2 * theta * t2);
    fm.T(0, 1) = fm.T(1, 0) = ph * t1 * e1 * theta * t2;

    double lam[2];
    for (int i = 0; i < 2; ++i) {
        lam[i] = detail::slab_lambda(nR, nI, ql, i == 0 ? +1 : -1);
        const double tol = 1e-12 * std::max(1.0, ql);
        if (lam[i] < -tol) throw DomainError("negative slab absorption weight: the medium is not absorbing");
        if (lam[i] < 0) {
            if (diag) diag->warn("clipped round-off negative slab absorption weight");
            lam[i] = 0;
        }
    }
    const double pre = std::sqrt(std::max(nI * nR, 0.0));
    const cplx half = std::exp(-0.5 * I * ql);
    fm.A(0, 0) = fm.A(1, 0) = pre * half * t1 * theta * std::sqrt(lam[0]) * (1.0 - e1 * r);
    fm.A(0, 1) = pre * half * t1 * theta * std::sqrt(lam[1]) * (1.0 + e1 * r);
    fm.A(1, 1) = -fm.A(0, 1);
    return fm;
}

template <DielectricModel M>
FourPortMatrices slab_matrices(const SlabDevice<M>& dev, double omega, Diagnostics* diag = nullptr) {
    dev.validate();
    return slab_matrices(dev.l, omega, refractive_index(dev.medium.permittivity(omega)).value(), diag);
}

// C = sqrt(T T^dagger), S = sqrt(A A^dagger)
inline std::pair<Mat2c, Mat2c> characteristic_cs(const FourPortMatrices& fm) {
    auto herm = [](const Mat2c& m) { return Mat2c(0.5 * (m + m.adjoint())); };
    return {numerics::hermitian_sqrt(herm(fm.T * fm.T.adjoint())),
            numerics::hermitian_sqrt(herm(fm.A * fm.A.adjoint()))};
}

struct LambdaMatrix {
    Mat4c matrix;      // top row blocks are exactly (T, A)
    Mat4c phase_fixed; // column phases removed and det = 1
};

namespace detail {

// Unit vector orthogonal (in C^2) to v.
inline Eigen::RowVector2cd orthogonal_row(const Eigen::RowVector2cd& v) {
    return Eigen::RowVector2cd(-std::conj(v[1]), std::conj(v[0]));
}

// Orthonormal rows with the directions of the (mutually orthogonal) rows of m. The
// longer row is normalized directly; the shorter one is the orthogonal completion,
// carrying its own phase unless its norm is below eps. Both degenerate: `fallback`.
inline Mat2c normalized_rows(const Mat2c& m, const Eigen::Vector2d& norms, const Mat2c& fallback) {
    constexpr double eps = 1e-8;
    if (norms.maxCoeff() < eps) return fallback;
    const int big = norms[0] >= norms[1] ? 0 : 1, small = 1 - big;
    Mat2c out;
    out.row(big) = m.row(big) / norms[big];
    Eigen::RowVector2cd comp = orthogonal_row(out.row(big));
    if (norms[small] >= eps) {
        const cplx proj = comp.dot(m.row(small));  // sum conj(comp_i) m_i
        comp *= proj / std::abs(proj);
    }
    out.row(small) = comp;
    return out;
}

}  // namespace detail

// Unitary 4x4 embedding
//   [[T, A], [-S C^{-1} T, C S^{-1} A]]
// built in the common eigenbasis of C and S, which stays defined when C or S is singular.
inline LambdaMatrix su4_lambda(const FourPortMatrices& fm) {
    if (fm.unitarity_defect() > 1e-8)
        throw DomainError("T T^dagger + A A^dagger deviates from the identity");
    const Mat2c tt = 0.5 * (fm.T * fm.T.adjoint() + (fm.T * fm.T.adjoint()).adjoint());
    Eigen::SelfAdjointEigenSolver<Mat2c> es(tt);
    const Mat2c U = es.eigenvectors();
    const Mat2c uT = U.adjoint() * fm.T, uA = U.adjoint() * fm.A;
    Eigen::Vector2d c, s;
    for (int k = 0; k < 2; ++k) {
        c[k] = uT.row(k).norm();
        s[k] = uA.row(k).norm();
    }
    const Mat2c That = detail::normalized_rows(uT, c, U.adjoint());
    const Mat2c Ahat = detail::normalized_rows(uA, s, U.adjoint());

    Mat4c inner;
    inner.block<2, 2>(0, 0) = c.cast<cplx>().asDiagonal() * That;
    inner.block<2, 2>(0, 2) = s.cast<cplx>().asDiagonal() * Ahat;
    inner.block<2, 2>(2, 0) = -(s.cast<cplx>().asDiagonal() * That);
    inner.block<2, 2>(2, 2) = c.cast<cplx>().asDiagonal() * Ahat;
    Mat4c outer = Mat4c::Zero();
    outer.block<2, 2>(0, 0) = U;
    outer.block<2, 2>(2, 2) = U;

    LambdaMatrix out;
    out.matrix = outer * inner;
    // Exact top blocks, free of the round-off from the basis change.
    out.matrix.block<2, 2>(0, 0) = fm.T;
    out.matrix.block<2, 2>(0, 2) = fm.A;

    out.phase_fixed = out.matrix;
    for (int j = 0; j < 4; ++j) {
        Eigen::Index i;
        out.phase_fixed.col(j).cwiseAbs().maxCoeff(&i);
        const cplx p = out.phase_fixed(i, j);
        out.phase_fixed.col(j) *= std::conj(p) / std::abs(p);
    }
    const cplx det = out.phase_fixed.determinant();
    out.phase_fixed *= std::polar(1.0, -std::arg(det) / 4);
    return out;
}

inline cplx propagate_mean_amplitude(cplx a_mean, double dx, double omega, double n_I) {
    if (!(dx >= 0)) throw DomainError("propagation distance must be non-negative");
    return a_mean * std::exp(-n_I * omega * dx);
}

template <DielectricModel M>
cplx propagate_mean_amplitude(cplx a_mean, double dx, double omega, const M& m) {
    return propagate_mean_amplitude(a_mean, dx, omega, refractive_index(m.permittivity(omega)).n_I);
}

// Fibre with perfect input coupling: T = e^{i n_R omega l} e^{-l/L}
inline cplx fibre_transmission(double l, double L, double n_R, double omega) {
    if (!(l >= 0)) throw DomainError("fibre length must be non-negative");
    if (!(L > 0)) throw DomainError("absorption length must be positive");
    return std::exp(cplx(-l / L, n_R * omega * l));
}

}  // namespace macroqed
