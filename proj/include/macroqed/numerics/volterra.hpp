#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "macroqed/error.hpp"

namespace macroqed::numerics {

struct TimeGrid {
    double t_max = 1.0;
    int n_steps = 1000;

    void validate() const {
        if (!(t_max > 0)) throw ValidationError("t_max must be positive");
        if (n_steps < 2) throw ValidationError("n_steps must be at least 2");
    }
    double dt() const { return t_max / n_steps; }
    double time(int k) const { return t_max * k / n_steps; }
};

// Time-gridded upper-state amplitude.
struct DecayTrajectory {
    std::vector<double> times;
    std::vector<std::complex<double>> amplitudes;

    std::size_t size() const { return times.size(); }
    double probability(std::size_t k) const { return std::norm(amplitudes[k]); }
    std::vector<double> probabilities() const {
        std::vector<double> p(size());
        for (std::size_t k = 0; k < size(); ++k) p[k] = probability(k);
        return p;
    }
};

// Product-integration weights for the first few cells, where a kernel that rises faster than
// one step is poorly represented by its endpoint samples. For cell m (tau in [m dt, (m+1) dt])
// near[m] multiplies C at tau = m dt and far[m] multiplies C at tau = (m+1) dt.
struct KernelHead {
    std::vector<std::complex<double>> near, far;
};

// C(t) = 1 + int_0^t kbar(t - s) C(s) ds with trapezoidal product integration.
// kbar[k] holds kbar(k dt) for k = 0..n_steps.
inline DecayTrajectory solve_volterra2_sampled(const std::vector<std::complex<double>>& kbar,
                                               const TimeGrid& grid, const KernelHead* head = nullptr) {
    grid.validate();
    const int n = grid.n_steps;
    if (static_cast<int>(kbar.size()) != n + 1)
        throw ValidationError("kernel samples must cover the whole time grid");
    const std::size_t n_head = head ? head->near.size() : 0;
    if (head && head->far.size() != n_head) throw ValidationError("kernel head weights are inconsistent");
    const double dt = grid.dt();

    std::vector<std::complex<double>> near(n), far(n);
    for (int m = 0; m < n; ++m) {
        const bool exact = static_cast<std::size_t>(m) < n_head;
        near[m] = exact ? head->near[m] : 0.5 * dt * kbar[m];
        far[m] = exact ? head->far[m] : 0.5 * dt * kbar[m + 1];
    }
    // weight of C_{k-m} for 1 <= m < k
    std::vector<std::complex<double>> lag(n);
    for (int m = 1; m < n; ++m) lag[m] = near[m] + far[m - 1];

    const std::complex<double> diag = 1.0 - near[0];
    if (std::abs(diag) < 1e-14) throw DomainError("Volterra step is singular for this kernel");

    DecayTrajectory out;
    out.times.resize(n + 1);
    out.amplitudes.resize(n + 1);
    out.times[0] = 0;
    out.amplitudes[0] = 1.0;
    for (int k = 1; k <= n; ++k) {
        std::complex<double> acc = far[k - 1] * out.amplitudes[0];
        for (int m = 1; m < k; ++m) acc += lag[m] * out.amplitudes[k - m];
        out.amplitudes[k] = (1.0 + acc) / diag;
        out.times[k] = grid.time(k);
    }
    return out;
}

template <class K>
DecayTrajectory solve_volterra2(K&& kbar, const TimeGrid& grid) {
    grid.validate();
    std::vector<std::complex<double>> samples(grid.n_steps + 1);
    for (int k = 0; k <= grid.n_steps; ++k) samples[k] = kbar(grid.time(k));
    return solve_volterra2_sampled(samples, grid);
}

}  // namespace macroqed::numerics
