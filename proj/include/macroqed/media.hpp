#pragma once

#include <cmath>
#include <complex>
#include <concepts>
#include <numbers>
#include <utility>
#include <vector>

#include "macroqed/error.hpp"
#include "macroqed/numerics/quadrature.hpp"

namespace macroqed {

using cplx = std::complex<double>;

// Frequencies in units of omega_T, lengths in c/omega_T.
struct LorentzMedium {
    double omega_P = 0;
    double gamma = 0;
    double omega_T = 1;

    void validate() const {
        if (!(omega_P >= 0)) throw ValidationError("omega_p must be non-negative");
        if (!(gamma >= 0)) throw ValidationError("gamma must be non-negative (absorbing media only)");
        if (!(omega_T > 0)) throw ValidationError("omega_T must be positive");
    }

    cplx permittivity(double omega) const {
        if (!(omega > 0)) throw DomainError("permittivity is evaluated for omega > 0 only");
        if (omega_P == 0) return 1.0;
        return 1.0 + omega_P * omega_P / cplx(omega_T * omega_T - omega * omega, -gamma * omega);
    }

    // Coefficient a of eps_I ~ a / omega^3 at high frequency.
    double absorption_tail() const { return omega_P * omega_P * gamma; }
};

// Sum of Lorentz resonances: eps = sum_i eps_i - (N - 1).
struct MultiLorentzMedium {
    std::vector<LorentzMedium> resonances;

    void validate() const {
        if (resonances.empty()) throw ValidationError("at least one resonance is required");
        for (const auto& r : resonances) r.validate();
    }
    cplx permittivity(double omega) const {
        cplx eps = 1;
        for (const auto& r : resonances) eps += r.permittivity(omega) - 1.0;
        return eps;
    }
    double absorption_tail() const {
        double a = 0;
        for (const auto& r : resonances) a += r.absorption_tail();
        return a;
    }
};

// Frequency-independent permittivity; not causal, used for single-frequency studies.
struct ConstantMedium {
    cplx eps = 1;
    cplx permittivity(double omega) const {
        if (!(omega > 0)) throw DomainError("permittivity is evaluated for omega > 0 only");
        return eps;
    }
};

template <class M>
concept DielectricModel = requires(const M& m, double w) {
    { m.permittivity(w) } -> std::convertible_to<cplx>;
};

inline LorentzMedium vacuum() { return {}; }

template <DielectricModel M>
cplx permittivity(const M& m, double omega) {
    return m.permittivity(omega);
}

struct ComplexIndex {
    double n_R = 1;
    double n_I = 0;
    cplx value() const { return {n_R, n_I}; }
};

// Branch with Im n >= 0; on the negative real axis n is purely imaginary.
inline ComplexIndex refractive_index(cplx eps, Diagnostics* diag = nullptr) {
    if (eps == cplx(0)) throw DomainError("refractive index undefined for eps = 0");
    if (eps.imag() == 0 && eps.real() < 0) {
        if (diag) diag->warn("permittivity on the negative real axis: n_R = 0+ convention");
        return {0.0, std::sqrt(-eps.real())};
    }
    cplx n = std::sqrt(eps);
    if (n.imag() < 0) n = -n;
    return {n.real(), n.imag()};
}

inline std::pair<double, double> band_gap(const LorentzMedium& m) {
    return {m.omega_T, std::sqrt(m.omega_T * m.omega_T + m.omega_P * m.omega_P)};
}

// Real part of eps - 1 recovered from eps_I alone:
//   (2/pi) P int_0^inf w' eps_I(w') / (w'^2 - w^2) dw',
// truncated at w' = cutoff with the analytic 1/w'^3 tail added.
template <class M>
double kk_reconstruct(const M& m, double omega, const numerics::QuadratureConfig& cfg = {},
                      double cutoff = 1e3) {
    if (!(omega > 0)) throw DomainError("kk_reconstruct requires omega > 0");
    if (!(cutoff > 2 * omega)) throw DomainError("KK cutoff must lie well above omega");
    auto f = [&](double w) {
        if (w <= 0) return 0.0;
        return w * m.permittivity(w).imag() / (w * w - omega * omega);
    };
    const double pv = numerics::integrate_principal_value(f, omega, 0.0, cutoff, cfg).real();
    const double tail = m.absorption_tail() / (3.0 * cutoff * cutoff * cutoff);
    return 2.0 / std::numbers::pi * (pv + tail);
}

}  // namespace macroqed
