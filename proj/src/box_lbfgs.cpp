#include "xqc/box_lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace xqc {

namespace {

VecX project(const VecX& x, const VecX& lo, const VecX& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

double proj_grad_inf(const VecX& x, const VecX& g, const VecX& lo, const VecX& hi) {
    return (x - project(x - g, lo, hi)).lpNorm<Eigen::Infinity>();
}

} // namespace

BoxLbfgsResult box_lbfgs_minimize(const BoxObjective& objective, VecX x0, const VecX& lower,
                                  const VecX& upper, const BoxLbfgsOptions& opts) {
    const auto n = x0.size();
    BoxLbfgsResult result;
    VecX x = project(x0, lower, upper);
    VecX g(n);
    double f = objective(x, g);

    std::deque<std::pair<VecX, VecX>> pairs; // (s, y)
    result.history.push_back({0, f, proj_grad_inf(x, g, lower, upper)});

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        const double pg = proj_grad_inf(x, g, lower, upper);
        const double tol = opts.grad_tolerance + opts.grad_tolerance_rel_f * std::abs(f);
        if (pg <= tol) {
            result.converged = true;
            break;
        }

        // Two-loop recursion for d = -H g.
        VecX q = g;
        std::vector<double> alpha(pairs.size());
        for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
            const auto& [s, y] = pairs[i];
            const double rho = 1.0 / y.dot(s);
            alpha[i] = rho * s.dot(q);
            q -= alpha[i] * y;
        }
        if (!pairs.empty()) {
            const auto& [s, y] = pairs.back();
            q *= s.dot(y) / y.dot(y);
        }
        for (size_t i = 0; i < pairs.size(); ++i) {
            const auto& [s, y] = pairs[i];
            const double rho = 1.0 / y.dot(s);
            const double beta = rho * y.dot(q);
            q += (alpha[i] - beta) * s;
        }
        VecX d = -q;

        // Fall back to steepest descent if projection kills the direction.
        VecX x_probe = project(x + d, lower, upper);
        if (g.dot(x_probe - x) >= 0.0) d = -g;

        double step = 1.0;
        VecX x_new, g_new(n);
        double f_new = std::numeric_limits<double>::quiet_NaN();
        bool accepted = false;
        for (int ls = 0; ls < opts.max_line_search; ++ls) {
            x_new = project(x + step * d, lower, upper);
            const VecX dx = x_new - x;
            if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;
            const double slope = g.dot(dx);
            try {
                f_new = objective(x_new, g_new);
            } catch (const XqcError&) {
                step *= 0.5;
                continue;
            }
            if (std::isfinite(f_new) &&
                f_new <= f + opts.armijo_c1 * std::min(slope, 0.0) +
                             1e-12 * std::max(1.0, std::abs(f))) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // line search exhausted; keep best-so-far

        const VecX s = x_new - x;
        const VecX y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            pairs.emplace_back(s, y);
            if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
        }

        const double df = f - f_new;
        x = std::move(x_new);
        g = g_new;
        f = f_new;
        result.iterations = iter;
        result.history.push_back({iter, f, proj_grad_inf(x, g, lower, upper)});

        if (std::abs(df) < opts.rel_decrease_tol * std::max(std::abs(f), 1.0)) {
            result.converged = true;
            break;
        }
    }

    result.x = std::move(x);
    result.f = f;
    result.grad = std::move(g);
    return result;
}

} // namespace xqc
