#pragma once

#include "xqc/common.hpp"

#include <functional>
#include <vector>

namespace xqc {

// Objective callback: returns f(x) and fills grad (same size as x). May throw
// XqcError for infeasible points; the optimizer backtracks in that case.
using BoxObjective = std::function<double(const VecX& x, VecX& grad)>;

struct BoxLbfgsOptions {
    int memory = 10;
    int max_iterations = 200;
    double grad_tolerance = 0.0;       // absolute projected-gradient inf-norm
    double grad_tolerance_rel_f = 0.0; // added as rel * |f|
    double rel_decrease_tol = 1e-8;    // stop when |df| < tol * max(|f|,1)
    double armijo_c1 = 1e-4;
    double curvature_c2 = 0.9;
    int max_line_search = 30;
};

struct BoxLbfgsIterate {
    int iter = 0;
    double f = 0.0;
    double proj_grad_norm = 0.0;
};

struct BoxLbfgsResult {
    VecX x;
    double f = 0.0;
    VecX grad;
    int iterations = 0;
    bool converged = false; // false when stopped by the iteration cap
    std::vector<BoxLbfgsIterate> history;
};

// Projected limited-memory quasi-Newton minimization over a box. Two-loop
// L-BFGS directions, backtracking line search along the projected path, and
// curvature-guarded pair updates.
BoxLbfgsResult box_lbfgs_minimize(const BoxObjective& objective, VecX x0, const VecX& lower,
                                  const VecX& upper, const BoxLbfgsOptions& opts = {});

} // namespace xqc
