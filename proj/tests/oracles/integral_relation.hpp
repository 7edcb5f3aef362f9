#pragma once

// Left side of the 1D integral relation
//   int ds omega^2 eps_I G(x, s) G*(x', s) = Im G(x, x'),
// by fixed-order Gauss-Kronrod on pieces of half a decay length around x and x'.

#include <algorithm>
#include <cmath>
#include <complex>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "macroqed/greens.hpp"

namespace oracle {

inline double integral_relation_lhs(double x, double xp, double omega, const macroqed::LorentzMedium& m) {
    using namespace macroqed;
    const cplx eps = m.permittivity(omega);
    const cplx n = refractive_index(eps).value();
    const double decay_len = 1.0 / (omega * n.imag());
    auto f = [&](double s) {
        return (omega * omega * eps.imag() * bulk_1d(x, s, omega, n) * std::conj(bulk_1d(xp, s, omega, n))).real();
    };
    const double lo = std::min(x, xp), hi = std::max(x, xp);
    const double span = 40 * decay_len;
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double total = 0;
    auto piece = [&](double a, double b) {
        const int n_pieces = std::max(1, static_cast<int>(std::ceil((b - a) / (0.5 * decay_len))));
        for (int i = 0; i < n_pieces; ++i)
            total += GK::integrate(f, a + (b - a) * i / n_pieces, a + (b - a) * (i + 1) / n_pieces, 8, 1e-14);
    };
    piece(lo - span, lo);
    if (hi > lo) piece(lo, hi);
    piece(hi, hi + span);
    return total;
}

}  // namespace oracle
