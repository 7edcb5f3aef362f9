#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "macroqed/error.hpp"
#include "macroqed/greens.hpp"
#include "macroqed/media.hpp"
#include "macroqed/numerics/quadrature.hpp"
#include "macroqed/numerics/volterra.hpp"

namespace macroqed {

using numerics::DecayTrajectory;
using numerics::TimeGrid;

// Rates are reported relative to the free-space rate gamma_0 at omega_A.
struct Dipole {
    double omega_A = 1;
    Vec3 d_hat = Vec3::UnitZ();
    double gamma0_scale = 1e-6;  // gamma_0 lambda_T / (2c)

    void validate() const {
        if (!(omega_A > 0)) throw ValidationError("omega_A must be positive");
        if (std::abs(d_hat.norm() - 1.0) > 1e-12) throw ValidationError("d_hat must be a unit vector");
        if (!(gamma0_scale > 0)) throw ValidationError("gamma0_scale must be positive");
    }
    // gamma_0 in units of omega_T.
    double gamma0() const { return gamma0_scale / pi; }
};

enum class RateMode { exact, asymptotic, expansion };

inline double gamma_free(const Dipole&) { return 1.0; }

// gamma / gamma_0 = (6 pi c / omega_A) d_i d_j Im G_ij
inline double gamma_from_green(const Dipole& dip, const Eigen::Matrix3d& imG) {
    dip.validate();
    const double scale = std::max(1e-300, imG.norm());
    if ((imG - imG.transpose()).norm() > 1e-10 * scale)
        throw ValidationError("Im G must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(imG);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw ValidationError("Im G must be positive semidefinite");
    return 6 * pi / dip.omega_A * dip.d_hat.dot(imG * dip.d_hat);
}

// Medium-induced part of the level shift, in units of gamma_0:
//   (3 / omega_A^3) P int_0^omega_max  omega^2 d.Im R(omega).d / (omega - omega_A) domega.
// Only the scattering part Im R is accepted; the free-space part diverges.
inline double lamb_shift(const Dipole& dip,
                         const std::function<Eigen::Matrix3d(double)>& imR_spectrum,
                         double omega_max, const numerics::QuadratureConfig& cfg = {}) {
    dip.validate();
    const double wa = dip.omega_A;
    if (!(omega_max > wa)) throw DomainError("upper frequency limit must exceed omega_A");
    auto f = [&](double w) {
        if (w <= 0) return 0.0;
        return w * w * dip.d_hat.dot(imR_spectrum(w) * dip.d_hat) / (w - wa);
    };
    return 3.0 / (wa * wa * wa) *
           numerics::integrate_principal_value(f, wa, 0.0, omega_max, cfg).real();
}

// ---------------------------------------------------------------- half-space

template <DielectricModel M>
double gamma_near_surface(const Dipole& dip, double z, const M& m, RateMode mode,
                          const numerics::QuadratureConfig& cfg = {}) {
    dip.validate();
    if (!(z > 0)) throw DomainError("height above the interface must be positive");
    const double w = dip.omega_A;
    const cplx eps = m.permittivity(w);
    const Vec3& d = dip.d_hat;
    if (mode == RateMode::asymptotic) {
        // leading z^-3 term
        return 1.0 + 0.375 * (1 + d.z() * d.z()) / std::pow(w * z, 3) * eps.imag() /
                         std::norm(eps + 1.0);
    }
    if (mode != RateMode::exact) throw DomainError("near-surface rate supports exact and asymptotic modes");
    const auto R = halfspace_reflection(z, w, eps, cfg);
    return 1.0 + 6 * pi / w *
                     ((d.x() * d.x() + d.y() * d.y()) * R.R_xx.imag() + d.z() * d.z() * R.R_zz.imag());
}

// ---------------------------------------------------------------- real cavity

inline double local_field_factor(double n_real) {
    if (!(n_real > 0)) throw DomainError("local-field factor needs n > 0");
    const double n2 = n_real * n_real;
    const double x = 3 * n2 / (2 * n2 + 1);
    return x * x;
}

// Small-radius expansion of the centre-of-cavity rate through O(R^0).
inline double real_cavity_expansion(double rho, cplx eps) {
    const ComplexIndex n = refractive_index(eps);
    const double eR = eps.real(), eI = eps.imag(), a2 = std::norm(eps);
    const double D2 = std::norm(2.0 * eps + 1.0), D4 = D2 * D2;
    return 9 * eI / D2 / (rho * rho * rho) +
           9 * eI * (28 * a2 + 16 * eR + 1) / (5 * D4) / rho +
           9 * n.n_R / D4 * (4 * a2 * a2 + 4 * eR * a2 + eR * eR - eI * eI) -
           9 * n.n_I * eI / D4 * (4 * a2 + 2 * eR);
}

template <DielectricModel M>
double gamma_real_cavity(const Dipole& dip, const SphericalCavity<M>& cav, RateMode mode) {
    dip.validate();
    cav.validate();
    const double w = dip.omega_A;
    if (mode == RateMode::exact) return 1.0 + cavity_c1n(cav, w).real();
    if (mode == RateMode::expansion) return real_cavity_expansion(cav.R * w, cav.medium.permittivity(w));
    throw DomainError("real-cavity rate supports exact and expansion modes");
}

// ---------------------------------------------------------------- microresonator

template <DielectricModel M>
double gamma_resonator(const Dipole& dip, const SphericalResonator<M>& res,
                       Diagnostics* diag = nullptr) {
    dip.validate();
    return 1.0 + resonator_c1n(res, dip.omega_A, diag).real();
}

// Thick-wall closed form, written so that it stays finite at the poles of tan.
template <DielectricModel M>
double gamma_resonator_thickwall(const Dipole& dip, double R2, const M& m,
                                 Diagnostics* diag = nullptr) {
    dip.validate();
    if (!(R2 > 0)) throw DomainError("inner radius must be positive");
    const double x = R2 * dip.omega_A;
    if (x < 10 && diag) diag->warn("thick-wall formula used outside R2 omega_A / c >> 1");
    const ComplexIndex n = refractive_index(m.permittivity(dip.omega_A));
    const double s = std::sin(x), c = std::cos(x);
    const double a = c + n.n_I * s;
    return n.n_R / (a * a + n.n_R * n.n_R * s * s);
}

// ---------------------------------------------------------------- single-resonance model

inline double rabi_frequency(double gamma_C, double delta_C) {
    if (!(gamma_C > 0 && delta_C > 0)) throw DomainError("gamma_C and delta_C must be positive");
    return std::sqrt(2 * gamma_C * delta_C);
}

// Width of a cavity line: c gamma_0 / (R2 gamma_C); gamma_ratio = gamma_C / gamma_0.
inline double resonance_width(double R2, double gamma_ratio) {
    if (!(R2 > 0 && gamma_ratio > 0)) throw DomainError("R2 and gamma_C must be positive");
    return 1.0 / (R2 * gamma_ratio);
}

// Volterra kernel of a single Lorentzian cavity line (detuning = omega_C - omega_A):
// the time integral of -gamma_C delta_C / 2 exp[-(i detuning + delta_C) tau].
inline cplx single_resonance_kbar(double gamma_C, double delta_C, double detuning, double tau) {
    const cplx s(delta_C, detuning);
    const cplx x = s * tau;
    // (1 - e^{-x}) / s without cancellation at small x
    const cplx frac = std::abs(x) < 1e-3 ? tau * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
                                         : -numerics::expm1(-x) / s;
    return -0.5 * gamma_C * delta_C * frac;
}

// C'' + (i detuning + delta_C) C' + gamma_C delta_C / 2 C = 0, C(0) = 1, C'(0) = 0.
inline DecayTrajectory single_resonance_dynamics(double gamma_C, double delta_C, double detuning,
                                                 const TimeGrid& grid) {
    grid.validate();
    const double omega = rabi_frequency(gamma_C, delta_C);
    const double scale = std::max({omega, delta_C, std::abs(detuning), gamma_C});
    const double h_max = (2 * pi / scale) / 200;
    const int sub = std::max(1, static_cast<int>(std::ceil(grid.dt() / h_max)));
    const double h = grid.dt() / sub;
    const cplx damp(delta_C, detuning);
    const double k0 = 0.5 * gamma_C * delta_C;
    using State = Eigen::Vector2cd;
    auto rhs = [&](const State& y) { return State(y[1], -damp * y[1] - k0 * y[0]); };

    DecayTrajectory out;
    out.times.resize(grid.n_steps + 1);
    out.amplitudes.resize(grid.n_steps + 1);
    State y(1.0, 0.0);
    out.times[0] = 0;
    out.amplitudes[0] = 1.0;
    for (int k = 1; k <= grid.n_steps; ++k) {
        for (int s = 0; s < sub; ++s) {
            const State a = rhs(y), b = rhs(y + 0.5 * h * a), c = rhs(y + 0.5 * h * b),
                        d = rhs(y + h * c);
            y += h / 6 * (a + 2 * b + 2 * c + d);
        }
        out.times[k] = grid.time(k);
        out.amplitudes[k] = y[0];
    }
    return out;
}

// ---------------------------------------------------------------- general kernel

struct FrequencyWindow {
    double lo, hi;
};

// [max(omega_A / 2, omega_A - 200 delta), omega_A + 200 delta]
inline FrequencyWindow default_kernel_window(double omega_A, double delta) {
    return {std::max(0.5 * omega_A, omega_A - 200 * delta), omega_A + 200 * delta};
}

namespace detail {

// Sample points for a piecewise-linear model of the spectrum: bisection until the
// midpoint interpolation error is small, plus dense clusters around detected peaks.
inline std::vector<double> spectral_mesh(const std::function<double(double)>& rate,
                                         FrequencyWindow w, double max_step) {
    const int n0 = 2000;
    std::vector<double> xs(n0 + 1), ys(n0 + 1);
    for (int i = 0; i <= n0; ++i) {
        xs[i] = w.lo + (w.hi - w.lo) * i / n0;
        ys[i] = rate(xs[i]);
    }
    double ymax = *std::max_element(ys.begin(), ys.end());
    std::vector<double> sorted = ys;
    std::nth_element(sorted.begin(), sorted.begin() + n0 / 2, sorted.end());
    const double median = sorted[n0 / 2];

    struct Node { double x, y; };
    std::vector<Node> mesh;
    const double tol = 1e-4 * std::max(ymax, 1e-300);
    const int max_points = 400000;
    std::function<void(double, double, double, double, int)> refine =
        [&](double x0, double y0, double x1, double y1, int depth) {
            const double xm = 0.5 * (x0 + x1);
            const double ym = rate(xm);
            const bool coarse = (x1 - x0) > max_step;
            if (depth < 40 && static_cast<int>(mesh.size()) < max_points &&
                (coarse || std::abs(ym - 0.5 * (y0 + y1)) > tol)) {
                refine(x0, y0, xm, ym, depth + 1);
                mesh.push_back({xm, ym});
                refine(xm, ym, x1, y1, depth + 1);
            }
        };
    for (int i = 0; i < n0; ++i) {
        mesh.push_back({xs[i], ys[i]});
        refine(xs[i], ys[i], xs[i + 1], ys[i + 1], 0);
    }
    mesh.push_back({xs[n0], ys[n0]});

    // Peaks: local maxima above 3x the median. Resolve each with >= 40 points per FWHM.
    std::vector<double> extra;
    for (std::size_t i = 1; i + 1 < mesh.size(); ++i) {
        if (!(mesh[i].y > mesh[i - 1].y && mesh[i].y >= mesh[i + 1].y && mesh[i].y > 3 * median))
            continue;
        const double half = 0.5 * (mesh[i].y + median);
        std::size_t l = i, r = i;
        while (l > 0 && mesh[l].y > half) --l;
        while (r + 1 < mesh.size() && mesh[r].y > half) ++r;
        const double fwhm = std::max(mesh[r].x - mesh[l].x, 1e-15);
        const double step = fwhm / 40;
        const double a = std::max(w.lo, mesh[i].x - 10 * fwhm), b = std::min(w.hi, mesh[i].x + 10 * fwhm);
        for (double x = a; x < b && extra.size() < static_cast<std::size_t>(max_points); x += step)
            extra.push_back(x);
    }
    std::vector<double> out;
    out.reserve(mesh.size() + extra.size());
    for (auto& nd : mesh) out.push_back(nd.x);
    out.insert(out.end(), extra.begin(), extra.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double p, double q) { return std::abs(p - q) <= 1e-15 * std::abs(p); }),
              out.end());
    return out;
}

// int_0^h e^{-i v s} dv and int_0^h v e^{-i v s} dv
inline std::pair<cplx, cplx> filon_moments(double h, double s) {
    const cplx I(0, 1);
    const double x = h * s;
    if (std::abs(x) < 0.5) {
        cplx e0 = 0, e1 = 0, p = 1;
        double fact = 1;
        for (int m = 0; m < 24; ++m) {
            if (m > 0) fact *= m;
            e0 += p / (fact * (m + 1));
            e1 += p / (fact * (m + 2));
            p *= -I * x;
        }
        return {h * e0, h * h * e1};
    }
    const cplx e = std::exp(-I * x);
    const cplx e0 = (1.0 - e) / (I * s);
    const cplx e1 = e * (I * h / s + 1.0 / (s * s)) - 1.0 / (s * s);
    return {e0, e1};
}

}  // namespace detail

// Samples of the Volterra kernel
//   kbar(tau) = (1/2pi) int gamma(w) [e^{-i(w - wA) tau} - 1] / (i (w - wA)) dw
// on the grid, with the spectrum gamma (in units of gamma_0) modelled piecewise linearly
// and each step increment integrated exactly against the oscillatory factor.
// Times are in units of 1/gamma_0, spectrum frequencies in omega_T.
inline std::vector<cplx> volterra_kernel_samples(const std::function<double(double)>& rate,
                                                 double omega_A, double gamma0,
                                                 const TimeGrid& grid, FrequencyWindow window) {
    grid.validate();
    if (!(window.lo < omega_A && omega_A < window.hi))
        throw DomainError("kernel window must contain omega_A");
    if (!(gamma0 > 0)) throw DomainError("gamma_0 must be positive");
    const double dt = grid.dt() / gamma0;  // physical step in 1/omega_T
    const auto xs = detail::spectral_mesh(rate, window, 0.05 / dt);
    const std::size_t m = xs.size();
    std::vector<double> u(m);
    std::vector<cplx> g(m);
    const cplx I(0, 1);
    for (std::size_t i = 0; i < m; ++i) {
        u[i] = xs[i] - omega_A;
        const double x = u[i] * dt;
        // phi(u) = (1 - e^{-i u dt}) / (i u)
        const cplx phi = std::abs(x) < 1e-4 ? dt * (1.0 - I * x / 2.0 - x * x / 6.0)
                                            : (1.0 - std::exp(-I * x)) / (I * u[i]);
        g[i] = rate(xs[i]) * gamma0 * phi;
    }
    std::vector<cplx> kbar(grid.n_steps + 1);
    kbar[0] = 0;
    for (int k = 1; k <= grid.n_steps; ++k) {
        const double tau = (k - 1) * dt;
        cplx acc = 0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double h = u[i + 1] - u[i];
            const auto [e0, e1] = detail::filon_moments(h, tau);
            acc += std::exp(-I * u[i] * tau) * (g[i] * e0 + (g[i + 1] - g[i]) / h * e1);
        }
        kbar[k] = kbar[k - 1] - acc / (2 * pi);
    }
    for (auto& v : kbar) v /= gamma0;  // kernel acting on time measured in 1/gamma_0
    return kbar;
}

// Exact product weights for the first cells, from kernel samples on a grid refined by `sub`.
// A broad spectral window makes kbar jump to its plateau within a fraction of a step.
inline numerics::KernelHead volterra_kernel_head(const std::function<double(double)>& rate,
                                                 double omega_A, double gamma0, const TimeGrid& grid,
                                                 FrequencyWindow window, int cells = 4, int sub = 32) {
    cells = std::min(cells, grid.n_steps);
    const double dt = grid.dt();
    const auto fine = volterra_kernel_samples(rate, omega_A, gamma0, TimeGrid{cells * dt, cells * sub}, window);
    const double h = dt / sub;
    numerics::KernelHead head;
    head.near.assign(cells, 0.0);
    head.far.assign(cells, 0.0);
    for (int m = 0; m < cells; ++m)
        for (int i = 0; i < sub; ++i) {
            // kbar and the hat function are both linear on the sub-interval
            const cplx ka = fine[m * sub + i], kb = fine[m * sub + i + 1];
            const double wa = double(i) / sub, wb = double(i + 1) / sub;
            auto prod = [&](double a, double b) { return h / 6 * (2.0 * ka * a + ka * b + kb * a + 2.0 * kb * b); };
            head.far[m] += prod(wa, wb);
            head.near[m] += prod(1 - wa, 1 - wb);
        }
    return head;
}

// Upper-state amplitude for an arbitrary spectral density gamma(omega)/gamma_0 (including
// any omega^3 prefactor). Times in units of 1/gamma_0.
inline DecayTrajectory upper_state_dynamics(const Dipole& dip,
                                            const std::function<double(double)>& rate,
                                            const TimeGrid& grid, FrequencyWindow window,
                                            Diagnostics* diag = nullptr) {
    dip.validate();
    const auto kbar = volterra_kernel_samples(rate, dip.omega_A, dip.gamma0(), grid, window);
    const auto head = volterra_kernel_head(rate, dip.omega_A, dip.gamma0(), grid, window);
    if (diag) {
        const int n = 400;
        std::vector<double> ys(n + 1);
        for (int i = 0; i <= n; ++i) ys[i] = rate(window.lo + (window.hi - window.lo) * i / n);
        auto sorted = ys;
        std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
        const double median = sorted[n / 2];
        if (*std::max_element(ys.begin(), ys.end()) <= 3 * median)
            diag->warn("no spectral resonance inside the kernel window");
    }
    return numerics::solve_volterra2_sampled(kbar, grid, &head);
}

}  // namespace macroqed
