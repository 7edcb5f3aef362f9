#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "macroqed/error.hpp"

namespace macroqed::numerics {

using cplx = std::complex<double>;

struct QuadratureConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    int max_subdivisions = 2000;

    void validate() const {
        if (!(rel_tol > 0)) throw ValidationError("rel_tol must be positive");
        if (!(abs_tol >= 0)) throw ValidationError("abs_tol must be non-negative");
        if (max_subdivisions < 1) throw ValidationError("max_subdivisions must be at least 1");
    }
};

struct QuadratureEstimate {
    cplx value{};
    double error = 0;
    int subdivisions = 0;
};

namespace detail {

struct Panel {
    double a, b;
    cplx value;
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

// 15-point Kronrod estimate with the embedded 7-point Gauss rule as error gauge.
template <class F>
Panel gk15(F& f, double a, double b) {
    using K = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    static const auto& xk = K::abscissa();
    static const auto& wk = K::weights();
    static const auto& wg = G::weights();

    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    cplx f0 = f(c);
    cplx kron = wk[0] * f0;
    cplx gauss = wg[0] * f0;
    for (std::size_t i = 1; i < xk.size(); ++i) {
        cplx s = cplx(f(c - h * xk[i])) + cplx(f(c + h * xk[i]));
        kron += wk[i] * s;
        if (i % 2 == 0) gauss += wg[i / 2] * s;
    }
    kron *= h;
    gauss *= h;
    if (!std::isfinite(kron.real()) || !std::isfinite(kron.imag()))
        throw DomainError("integrand is not finite on [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]");
    return {a, b, kron, std::abs(kron - gauss)};
}

}  // namespace detail

// Global adaptive bisection: always split the panel with the largest error.
template <class F>
QuadratureEstimate integrate_adaptive_estimate(F&& f, double a, double b,
                                               const QuadratureConfig& cfg = {}) {
    cfg.validate();
    if (!(a < b)) throw DomainError("integration bounds must satisfy a < b");

    std::priority_queue<detail::Panel> heap;
    heap.push(detail::gk15(f, a, b));
    cplx total = heap.top().value;
    double err = heap.top().error;
    int splits = 0;

    auto tolerance = [&] { return std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total)); };
    while (err > tolerance()) {
        if (splits >= cfg.max_subdivisions)
            throw ConvergenceError("adaptive quadrature did not converge: error estimate " +
                                       std::to_string(err),
                                   err);
        detail::Panel worst = heap.top();
        heap.pop();
        const double m = 0.5 * (worst.a + worst.b);
        if (!(m > worst.a && m < worst.b))
            throw ConvergenceError("adaptive quadrature exhausted floating-point resolution", err);
        detail::Panel left = detail::gk15(f, worst.a, m);
        detail::Panel right = detail::gk15(f, m, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++splits;
    }
    // Re-sum to shed the drift from incremental updates.
    total = 0;
    err = 0;
    while (!heap.empty()) {
        total += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    return {total, err, splits};
}

template <class F>
cplx integrate_adaptive(F&& f, double a, double b, const QuadratureConfig& cfg = {}) {
    return integrate_adaptive_estimate(f, a, b, cfg).value;
}

// [a, inf): panels of doubling width until three consecutive panels are negligible.
template <class F>
cplx integrate_semi_infinite(F&& f, double a, const QuadratureConfig& cfg = {},
                             double first_panel = 1.0) {
    cfg.validate();
    if (!(first_panel > 0)) throw DomainError("first panel width must be positive");
    constexpr int max_panels = 200;
    cplx total = 0;
    double lo = a, width = first_panel;
    int quiet = 0;
    for (int p = 0; p < max_panels; ++p) {
        auto est = integrate_adaptive_estimate(f, lo, lo + width, cfg);
        total += est.value;
        const double floor = std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total)) * 1e-2;
        quiet = (std::abs(est.value) + est.error <= floor) ? quiet + 1 : 0;
        if (quiet == 3) return total;
        lo += width;
        width *= 2;
    }
    throw ConvergenceError("semi-infinite integrand does not decay", std::abs(total));
}

// Cauchy principal value of the integral of f over [a, b], f having a simple pole at x0.
// The symmetric neighbourhood of the pole is folded onto itself, which cancels the
// singular part exactly; the remainder is an ordinary integral.
template <class F>
cplx integrate_principal_value(F&& f, double x0, double a, double b,
                               const QuadratureConfig& cfg = {}) {
    if (!(a < x0 && x0 < b)) throw DomainError("singular point must lie inside (a, b)");
    const double h = std::min(x0 - a, b - x0);
    auto folded = [&](double u) { return cplx(f(x0 + u)) + cplx(f(x0 - u)); };
    cplx total = integrate_adaptive(folded, 0.0, h, cfg);
    if (x0 + h < b) total += integrate_adaptive(f, x0 + h, b, cfg);
    if (x0 - h > a) total += integrate_adaptive(f, a, x0 - h, cfg);
    return total;
}

}  // namespace macroqed::numerics
