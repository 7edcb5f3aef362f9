#pragma once

// Relative entropy of entanglement of the two Bell-state families after symmetric loss
// (|T1| = |T2|, p = |T|^2), without any general-purpose optimizer.

#include <cmath>
#include <utility>

#include <boost/math/tools/minima.hpp>

namespace oracle {

// rho = (1 - p)|00><00| + p|psi><psi|: closed form
inline double ree_psi_family(double p) {
    if (p <= 0) return 0;
    if (p >= 1) return std::log(2.0);
    return (p - 2) * std::log1p(-p / 2) + (1 - p) * std::log1p(-p);
}

// rho = X state with populations (a0, q, q, d0) and coherence z between |00> and |11>.
// By the phase and swap symmetries the closest separable state is an X state
// (a, b, b, d) with coherence exactly b (the PPT boundary), so the problem is 2D.
inline double ree_x_symmetric(double a0, double q, double d0, double z) {
    auto xlogx = [](double x) { return x > 0 ? x * std::log(x) : 0.0; };
    // eigenvalues of the 2x2 block [[a0, z], [z, d0]]
    auto block_eigs = [](double a, double d, double c) {
        const double m = 0.5 * (a + d), r = std::hypot(0.5 * (a - d), c);
        return std::pair<double, double>{m + r, m - r};
    };
    if (z * z <= q * q) return 0;  // PPT, separable
    const auto [l1, l2] = block_eigs(a0, d0, z);
    const double neg_s = xlogx(l1) + xlogx(l2) + 2 * xlogx(q);

    // -Tr rho ln sigma for sigma = X(a, b, b, d; coherence b)
    auto cross = [&](double a, double d) {
        const double b = 0.5 * (1 - a - d);
        if (!(b > 0 && a > 0 && d > 0)) return 1e300;
        const double m = 0.5 * (a + d), r = std::hypot(0.5 * (a - d), b);
        const double e1 = m + r, e2 = m - r;
        if (!(e2 > 0)) return 1e300;
        // eigenvectors of [[a, b], [b, d]]
        const double th = 0.5 * std::atan2(2 * b, a - d);
        const double c = std::cos(th), s = std::sin(th);
        const double w1 = c * c * a0 + 2 * c * s * z + s * s * d0;  // <v1|rho|v1>
        const double w2 = s * s * a0 - 2 * c * s * z + c * c * d0;
        return -(w1 * std::log(e1) + w2 * std::log(e2) + 2 * q * std::log(b));
    };
    const int bits = 52;
    auto inner = [&](double a) {
        auto f = [&](double d) { return cross(a, d); };
        return boost::math::tools::brent_find_minima(f, 1e-300, 1 - a, bits).second;
    };
    const auto best = boost::math::tools::brent_find_minima(inner, 1e-300, 1.0, bits);
    return std::max(0.0, neg_s + best.second);
}

}  // namespace oracle
