#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "macroqed/error.hpp"
#include "macroqed/media.hpp"
#include "macroqed/numerics/quadrature.hpp"
#include "macroqed/numerics/special.hpp"

namespace macroqed {

using std::numbers::pi;
using Vec3 = Eigen::Vector3d;
using Mat3c = Eigen::Matrix3cd;

struct GreenTensor3 {
    Mat3c entries = Mat3c::Zero();
    std::string geometry;
    Vec3 r = Vec3::Zero();
    Vec3 r_prime = Vec3::Zero();
};

template <DielectricModel M = LorentzMedium>
struct SphericalCavity {
    double R = 1;
    M medium{};
    void validate() const {
        if (!(R > 0)) throw ValidationError("cavity radius must be positive");
    }
};

template <DielectricModel M = LorentzMedium>
struct SphericalResonator {
    double R1 = 2;  // outer wall radius
    double R2 = 1;  // inner wall radius
    M wall{};
    void validate() const {
        if (!(R2 > 0 && R1 > R2)) throw ValidationError("resonator radii must satisfy 0 < R2 < R1");
    }
};

// ---------------------------------------------------------------- 1D bulk

inline cplx bulk_1d(double x, double xp, double omega, cplx n) {
    if (!(omega > 0)) throw DomainError("omega must be positive");
    const cplx I(0, 1);
    return -std::exp(I * omega * n * std::abs(x - xp)) / (2.0 * I * omega * n);
}

template <DielectricModel M>
cplx bulk_1d(double x, double xp, double omega, const M& m) {
    return bulk_1d(x, xp, omega, refractive_index(m.permittivity(omega)).value());
}

// ---------------------------------------------------------------- 3D isotropic bulk

inline GreenTensor3 bulk_iso(const Vec3& rho, double omega, cplx eps) {
    const double d = rho.norm();
    if (!(d > 0)) throw DomainError("bulk_iso needs a nonzero separation; use the coincidence limit");
    const cplx I(0, 1);
    const cplx q = refractive_index(eps).value() * omega;
    const cplx qr = q * d;
    const cplx g = std::exp(I * qr) / (4 * pi * d);
    const cplx a = 1.0 + I / qr - 1.0 / (qr * qr);
    const cplx b = -1.0 - 3.0 * I / qr + 3.0 / (qr * qr);
    const Vec3 u = rho / d;
    GreenTensor3 out;
    out.entries = g * (a * Mat3c::Identity() + b * (u * u.transpose()).cast<cplx>());
    out.geometry = "bulk-isotropic";
    out.r = rho;
    return out;
}

template <DielectricModel M>
GreenTensor3 bulk_iso(const Vec3& rho, double omega, const M& m) {
    return bulk_iso(rho, omega, m.permittivity(omega));
}

// Longitudinal and transverse parts at rho != 0 (the contact term is omitted).
inline std::pair<Mat3c, Mat3c> bulk_iso_split(const Vec3& rho, double omega, cplx eps) {
    const double d = rho.norm();
    if (!(d > 0)) throw DomainError("bulk_iso_split needs a nonzero separation");
    const cplx I(0, 1);
    const cplx q = refractive_index(eps).value() * omega;
    const cplx qr = q * d;
    const Vec3 u = rho / d;
    const Mat3c uu = (u * u.transpose()).cast<cplx>();
    const Mat3c dip = (Mat3c::Identity() - 3.0 * uu) / (d * d * d);
    Mat3c par = -dip / (4 * pi * q * q);
    Mat3c perp = dip / (4 * pi * q * q) +
                 q / (4 * pi) * std::exp(I * qr) *
                     ((1.0 / qr + I / (qr * qr) - 1.0 / (qr * qr * qr)) * Mat3c::Identity() -
                      (1.0 / qr + 3.0 * I / (qr * qr) - 3.0 / (qr * qr * qr)) * uu);
    return {par, perp};
}

template <DielectricModel M>
std::pair<Mat3c, Mat3c> bulk_iso_split(const Vec3& rho, double omega, const M& m) {
    return bulk_iso_split(rho, omega, m.permittivity(omega));
}

// Im G(r, r, omega) of the transverse part; the longitudinal part has no imaginary
// coincidence limit away from the contact term.
template <DielectricModel M>
Eigen::Matrix3d bulk_iso_im_coincidence(double omega, const M& m) {
    if (!(omega > 0)) throw DomainError("omega must be positive");
    const double nR = refractive_index(m.permittivity(omega)).n_R;
    return omega * nR / (6 * pi) * Eigen::Matrix3d::Identity();
}

// ---------------------------------------------------------------- uniaxial bulk

namespace detail {

inline Mat3c uniaxial_bulk_generic(const Vec3& rho, double omega, cplx eps_c, cplx eps_t,
                                   const Vec3& c) {
    const cplx I(0, 1);
    const cplx qt = refractive_index(eps_t).value() * omega;
    const double r = rho.norm();
    const double rc = rho.dot(c);
    const Vec3 P = rho.cross(c);
    const double p2 = P.squaredNorm();

    // M = eps_c eps^{-1} with eps = eps_t (I - cc) + eps_c cc
    const Mat3c cc = (c * c.transpose()).cast<cplx>();
    const Mat3c Mm = (eps_c / eps_t) * (Mat3c::Identity() - cc) + cc;
    const cplx re2 = (eps_c / eps_t) * p2 + rc * rc;
    cplx re = std::sqrt(re2);
    if (re.real() < 0) re = -re;

    const cplx e_re = std::exp(I * qt * re);
    const cplx f = e_re / (4 * pi * re);
    const cplx f1 = e_re * (I * qt * re - 1.0) / (4 * pi * re * re);
    const cplx f2 = e_re * (2.0 - 2.0 * I * qt * re - qt * qt * re * re) / (4 * pi * re * re * re);
    const Eigen::Vector3cd g = Mm * rho.cast<cplx>();  // gradient of re, times re
    const Mat3c ggT = g * g.transpose();
    const Mat3c hess = f2 * ggT / re2 + f1 * (Mm / re - ggT / (re2 * re));

    Mat3c G = hess / (qt * qt) + Mm * f;

    const Mat3c PP = (P * P.transpose()).cast<cplx>();
    const cplx e_r = std::exp(I * qt * r);
    G -= ((eps_c / eps_t) * f - e_r / (4 * pi * r)) * PP / p2;

    // e^{iq re} - e^{iq r} without cancellation: re - r = (re^2 - r^2)/(re + r)
    const cplx dre = (eps_c / eps_t - 1.0) * p2 / (re + r);
    const cplx diff = e_r * numerics::expm1(I * qt * dre);
    G -= diff / (4 * pi * I * qt) *
         ((Mat3c::Identity() - cc) / p2 - 2.0 * PP / (p2 * p2));
    return G;
}

}  // namespace detail

// Uniaxial bulk with optic axis c_axis. Separations (nearly) parallel to the axis are
// evaluated as the average over two symmetric transverse perturbations.
inline GreenTensor3 uniaxial_bulk(const Vec3& rho, double omega, cplx eps_c, cplx eps_t,
                                  const Vec3& c_axis) {
    if (!(rho.norm() > 0)) throw DomainError("uniaxial_bulk needs a nonzero separation");
    if (!(omega > 0)) throw DomainError("omega must be positive");
    if (!(c_axis.norm() > 0)) throw DomainError("optic axis must be nonzero");
    const Vec3 c = c_axis.normalized();
    GreenTensor3 out;
    out.geometry = "bulk-uniaxial";
    out.r = rho;
    const double r = rho.norm();
    if (rho.cross(c).norm() > 1e-6 * r) {
        out.entries = detail::uniaxial_bulk_generic(rho, omega, eps_c, eps_t, c);
        return out;
    }
    Vec3 e = c.unitOrthogonal();
    const double h = 1e-4 * r;
    out.entries = 0.5 * (detail::uniaxial_bulk_generic(rho + h * e, omega, eps_c, eps_t, c) +
                         detail::uniaxial_bulk_generic(rho - h * e, omega, eps_c, eps_t, c));
    return out;
}

// ---------------------------------------------------------------- planar half-space

struct HalfSpaceReflection {
    cplx R_xx;  // = R_yy
    cplx R_zz;
    Mat3c tensor() const {
        Mat3c t = Mat3c::Zero();
        t(0, 0) = t(1, 1) = R_xx;
        t(2, 2) = R_zz;
        return t;
    }
};

// Scattering part of the coincidence Green tensor at height z above a half-space of
// permittivity eps (vacuum above).
inline HalfSpaceReflection halfspace_reflection(double z, double omega, cplx eps,
                                                const numerics::QuadratureConfig& cfg = {}) {
    if (!(z > 0)) throw DomainError("height above the interface must be positive");
    if (!(omega > 0)) throw DomainError("omega must be positive");
    if (eps == cplx(1)) return {0, 0};
    const cplx I(0, 1);
    const double q = omega;
    auto beta1_of = [&](double k2) {
        cplx b = std::sqrt(eps * q * q - k2);
        if (b.imag() < 0 || (b.imag() == 0 && b.real() < 0)) b = -b;
        return b;
    };
    auto rp = [&](cplx beta, cplx b1) { return (eps * beta - b1) / (eps * beta + b1); };
    auto rs = [&](cplx beta, cplx b1) { return (beta - b1) / (beta + b1); };

    // Propagating waves, k = q sin(theta), dk = beta dtheta.
    auto prop = [&](double th) {
        const double k = q * std::sin(th), beta = q * std::cos(th);
        const cplx b1 = beta1_of(k * k);
        const cplx e = std::exp(2.0 * I * beta * z);
        const cplx p = rp(beta, b1) * e, s = rs(beta, b1) * e;
        return Eigen::Vector3cd(k * k * k * p, k * beta * beta * p, k * s);
    };
    // Evanescent waves, beta = i kappa, k dk = kappa dkappa.
    auto evan = [&](double kap) {
        const double k2 = kap * kap + q * q;
        const cplx beta = I * kap;
        const cplx b1 = beta1_of(k2);
        const double e = std::exp(-2.0 * kap * z);
        const cplx p = rp(beta, b1) * e, s = rs(beta, b1) * e;
        return Eigen::Vector3cd(-I * k2 * p, I * kap * kap * p, -I * s);
    };
    const double kap_max = std::min(20.0 / z, 200.0 / z);
    Eigen::Vector3cd sum;
    for (int c = 0; c < 3; ++c) {
        auto pc = [&](double th) { return prop(th)[c]; };
        auto ec = [&](double k) { return evan(k)[c]; };
        sum[c] = numerics::integrate_adaptive(pc, 0.0, pi / 2, cfg) +
                 numerics::integrate_adaptive(ec, 0.0, kap_max, cfg);
    }
    const cplx Rzz = I / (4 * pi * q * q) * sum[0];
    const cplx Rxx = -I / (8 * pi * q * q) * sum[1] + I / (8 * pi) * sum[2];
    return {Rxx, Rzz};
}

template <DielectricModel M>
HalfSpaceReflection halfspace_reflection(double z, double omega, const M& m,
                                         const numerics::QuadratureConfig& cfg = {}) {
    return halfspace_reflection(z, omega, m.permittivity(omega), cfg);
}

// Small-distance expansion through O(z^0).
inline HalfSpaceReflection halfspace_reflection_asymptotic(double z, double omega, cplx eps) {
    if (!(z > 0)) throw DomainError("height above the interface must be positive");
    const cplx I(0, 1);
    const double q = omega;
    const cplx n = refractive_index(eps).value();
    const cplx n2 = n * n;
    const cplx Rzz = (n2 - 1.0) / (n2 + 1.0) / (16 * pi * q * q * z * z * z) +
                     (n - 1.0) * (n - 1.0) / (n * (n + 1.0)) / (8 * pi * z) +
                     I * q / (12 * pi) * (n - 1.0) * (2.0 * n - 1.0) / (n * (n + 1.0));
    const cplx Rxx = 0.5 * Rzz - (n2 - 1.0) / (n2 + 1.0) / (16 * pi * z) -
                     I * q / (3 * pi) * (n - 1.0) / (n + 1.0);
    return {Rxx, Rzz};
}

// ---------------------------------------------------------------- spherical cavity

// Generalized TM reflection coefficient for the n = 1 wave at the centre of a vacuum
// sphere of size parameter rho = R omega / c embedded in a medium of index n.
inline cplx cavity_c1n(double rho, cplx n) {
    if (!(rho > 0)) throw DomainError("cavity size parameter must be positive");
    const cplx n2 = n * n;
    if (std::abs(n2 - 1.0) < 1e-12) return 0;
    const cplx I(0, 1);
    const double s = std::sin(rho), c = std::cos(rho);
    const cplx num = (I + rho * (n + 1.0) - I * rho * rho * n - rho * rho * rho * n2 / (n + 1.0)) *
                     std::exp(I * rho);
    const cplx den = s - rho * (c + I * n * s) + I * rho * rho * n * c -
                     rho * rho * rho * (c - I * n * s) * n2 / (n2 - 1.0);
    return num / den;
}

template <DielectricModel M>
cplx cavity_c1n(const SphericalCavity<M>& cav, double omega) {
    cav.validate();
    if (!(omega > 0)) throw DomainError("omega must be positive");
    return cavity_c1n(cav.R * omega, refractive_index(cav.medium.permittivity(omega)).value());
}

// ---------------------------------------------------------------- three-layer resonator

namespace detail {

// Radial functions scaled by e^{iz} (first kind) and e^{-iz} (Hankel) so that the
// matching system stays finite for strongly absorbing walls.
inline cplx scaled_j1(cplx z) {
    const cplx I(0, 1);
    if (std::abs(z) < 2.0) return numerics::spherical_bessel_j(1, z) * std::exp(I * z);
    const cplx e2 = std::exp(2.0 * I * z);
    return (e2 - 1.0) / (2.0 * I * z * z) - (e2 + 1.0) / (2.0 * z);
}
// [x j1(x)]' e^{iz}
inline cplx scaled_dxj1(cplx z) {
    const cplx I(0, 1);
    if (std::abs(z) < 2.0)
        return (z * numerics::spherical_bessel_j(0, z) - numerics::spherical_bessel_j(1, z)) *
               std::exp(I * z);
    const cplx e2 = std::exp(2.0 * I * z);
    return (e2 + 1.0) / (2.0 * z) + (e2 - 1.0) / (2.0 * I) * (1.0 - 1.0 / (z * z));
}
inline cplx scaled_h1(cplx z) { return -(z + cplx(0, 1)) / (z * z); }
inline cplx scaled_dxh1(cplx z) {
    const cplx I(0, 1);
    return -I + 1.0 / z + I / (z * z);
}

}  // namespace detail

// n = 1 TM reflection coefficient at the centre of a vacuum sphere (radius R2)
// surrounded by a wall of index n extending to R1, with vacuum outside.
// Inside: h1(qr) + C j1(qr); wall: A j1(nqr) + B h1(nqr); outside: D h1(qr).
inline cplx resonator_c1n(double R1, double R2, double omega, cplx n, Diagnostics* diag = nullptr) {
    if (!(R2 > 0 && R1 > R2)) throw DomainError("resonator radii must satisfy 0 < R2 < R1");
    if (!(omega > 0)) throw DomainError("omega must be positive");
    const cplx I(0, 1);
    const double a0 = omega * R2, b0 = omega * R1;
    const cplx a1 = n * a0, b1 = n * b0;
    const cplx E = std::exp(I * n * (b0 - a0));
    using namespace detail;
    // Unscaled vacuum functions (real arguments are harmless).
    const cplx j1a = numerics::spherical_bessel_j(1, a0);
    const cplx dxj1a = a0 * numerics::spherical_bessel_j(0, a0) - j1a;
    const cplx h1a = numerics::spherical_hankel1(1, a0), h1b = numerics::spherical_hankel1(1, b0);
    const cplx dxh1a = std::exp(I * a0) * scaled_dxh1(a0);
    const cplx dxh1b = std::exp(I * b0) * scaled_dxh1(b0);

    // Unknowns (C, A', B', D) with A = A' e^{i n q R1}, B = B' e^{-i n q R2}.
    Eigen::Matrix4cd S;
    S << dxj1a / a0, -scaled_dxj1(a1) * E / a1, -scaled_dxh1(a1) / a1, 0.0,
        j1a, -n * scaled_j1(a1) * E, -n * scaled_h1(a1), 0.0,
        0.0, scaled_dxj1(b1) / b1, scaled_dxh1(b1) * E / b1, -dxh1b / b0,
        0.0, n * scaled_j1(b1), n * scaled_h1(b1) * E, -h1b;
    Eigen::Vector4cd rhs(-dxh1a / a0, -h1a, 0.0, 0.0);
    Eigen::PartialPivLU<Eigen::Matrix4cd> lu(S);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) {
        if (diag) diag->warn("ill-conditioned resonator boundary system (rcond " + std::to_string(rc) + ")");
        else throw ConvergenceError("ill-conditioned resonator boundary system", rc);
    }
    return lu.solve(rhs)[0];
}

template <DielectricModel M>
cplx resonator_c1n(const SphericalResonator<M>& res, double omega, Diagnostics* diag = nullptr) {
    res.validate();
    return resonator_c1n(res.R1, res.R2, omega, refractive_index(res.wall.permittivity(omega)).value(),
                         diag);
}

}  // namespace macroqed
