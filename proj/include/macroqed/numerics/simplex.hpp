#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace macroqed::numerics {

struct SimplexOptions {
    double f_tol = 1e-12;       // spread of function values across the simplex
    double x_tol = 1e-9;        // simplex diameter
    int max_evaluations = 20000;
    double initial_step = 0.5;
};

struct SimplexResult {
    Eigen::VectorXd x;
    double value = 0;
    int evaluations = 0;
    bool converged = false;
};

// Nelder-Mead with dimension-adaptive coefficients (Gao & Han), which behave far
// better than the textbook constants once the dimension exceeds a handful.
template <class F>
SimplexResult nelder_mead(F&& f, const Eigen::VectorXd& x0, const SimplexOptions& opt = {}) {
    const int n = static_cast<int>(x0.size());
    const double dn = std::max(n, 2);
    const double alpha = 1.0, beta = 1.0 + 2.0 / dn, gamma = 0.75 - 0.5 / dn,
                 delta = 1.0 - 1.0 / dn;

    std::vector<Eigen::VectorXd> pts(n + 1, x0);
    std::vector<double> val(n + 1);
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        double v = f(x);
        return std::isfinite(v) ? v : HUGE_VAL;
    };
    for (int i = 0; i < n; ++i) pts[i + 1][i] += opt.initial_step;
    for (int i = 0; i <= n; ++i) val[i] = eval(pts[i]);

    std::vector<int> order(n + 1);
    bool converged = false;
    while (evals < opt.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
        const int best = order[0], worst = order[n], second = order[n - 1];

        double diam = 0;
        for (int i = 1; i <= n; ++i)
            diam = std::max(diam, (pts[order[i]] - pts[best]).lpNorm<Eigen::Infinity>());
        if (val[worst] - val[best] <= opt.f_tol && diam <= opt.x_tol) {
            converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += pts[order[i]];
        centroid /= n;

        Eigen::VectorXd xr = centroid + alpha * (centroid - pts[worst]);
        double fr = eval(xr);
        if (fr < val[best]) {
            Eigen::VectorXd xe = centroid + beta * (xr - centroid);
            double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                val[worst] = fe;
            } else {
                pts[worst] = xr;
                val[worst] = fr;
            }
            continue;
        }
        if (fr < val[second]) {
            pts[worst] = xr;
            val[worst] = fr;
            continue;
        }
        const bool outside = fr < val[worst];
        Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + gamma * (xr - centroid))
                                     : Eigen::VectorXd(centroid - gamma * (centroid - pts[worst]));
        double fc = eval(xc);
        if (fc < (outside ? fr : val[worst])) {
            pts[worst] = xc;
            val[worst] = fc;
            continue;
        }
        for (int i = 1; i <= n; ++i) {
            const int k = order[i];
            pts[k] = pts[best] + delta * (pts[k] - pts[best]);
            val[k] = eval(pts[k]);
        }
    }
    const int best = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
    return {pts[best], val[best], evals, converged};
}

}  // namespace macroqed::numerics
