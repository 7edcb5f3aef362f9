#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "macroqed/error.hpp"

namespace macroqed::numerics {

using cplx = std::complex<double>;

// Spherical Bessel function of the first kind, orders 0..3.
inline cplx spherical_bessel_j(int n, cplx z) {
    if (n < 0 || n > 3) throw DomainError("spherical_bessel_j supports orders 0..3");
    if (std::abs(z) < 2.0) {
        // Power series; the closed forms cancel catastrophically near the origin.
        double dfact = 1;
        for (int k = 3; k <= 2 * n + 1; k += 2) dfact *= k;
        const cplx w = -0.5 * z * z;
        cplx term = 1, sum = 1;
        for (int k = 1; k < 40; ++k) {
            term *= w / (double(k) * (2 * n + 2 * k + 1));
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return std::pow(z, n) / dfact * sum;
    }
    const cplx s = std::sin(z), c = std::cos(z);
    switch (n) {
        case 0: return s / z;
        case 1: return s / (z * z) - c / z;
        case 2: return (3.0 / (z * z) - 1.0) * s / z - 3.0 * c / (z * z);
        default: return (15.0 / (z * z * z) - 6.0 / z) * s / z - (15.0 / (z * z) - 1.0) * c / z;
    }
}

// Spherical Hankel function of the first kind, orders 0..3.
inline cplx spherical_hankel1(int n, cplx z) {
    if (n < 0 || n > 3) throw DomainError("spherical_hankel1 supports orders 0..3");
    if (z == cplx(0)) throw DomainError("spherical_hankel1 is singular at z = 0");
    const cplx I(0, 1);
    cplx sum = 0, pw = 1;
    double coeff = 1;  // (n+k)! / (k! (n-k)!)
    for (int k = 0; k <= n; ++k) {
        sum += coeff * pw;
        pw *= I / (2.0 * z);
        coeff *= double(n + k + 1) * (n - k) / (k + 1);
    }
    return std::pow(-I, n + 1) * std::exp(I * z) / z * sum;
}

// e^z - 1 accurate for small |z|.
inline cplx expm1(cplx z) {
    const double x = z.real(), y = z.imag();
    const double s = std::sin(0.5 * y);
    return {std::expm1(x) * std::cos(y) - 2 * s * s, std::exp(x) * std::sin(y)};
}

inline double assoc_laguerre(int k, double alpha, double x) {
    if (k < 0) throw DomainError("Laguerre order must be non-negative");
    double prev = 1, cur = 1 + alpha - x;
    if (k == 0) return prev;
    for (int j = 1; j < k; ++j) {
        double next = ((2 * j + 1 + alpha - x) * cur - (j + alpha) * prev) / (j + 1);
        prev = cur;
        cur = next;
    }
    return cur;
}

inline double laguerre(int k, double x) { return assoc_laguerre(k, 0.0, x); }

// Principal square root of a Hermitian positive-semidefinite 2x2 matrix.
inline Eigen::Matrix2cd hermitian_sqrt(const Eigen::Matrix2cd& m) {
    const double scale = std::max(1.0, m.norm());
    if ((m - m.adjoint()).norm() > 1e-12 * scale)
        throw ValidationError("hermitian_sqrt requires a Hermitian matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(m);
    Eigen::Vector2d ev = es.eigenvalues();
    for (int i = 0; i < 2; ++i) {
        if (ev[i] < -1e-12 * scale) throw DomainError("hermitian_sqrt requires a PSD matrix");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace macroqed::numerics
