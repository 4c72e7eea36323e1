#pragma once

#include "xqc/common.hpp"
#include "xqc/lattice.hpp"

#include <string>
#include <vector>

namespace xqc {

class DerivativeUnavailableError : public XqcError {
public:
    using XqcError::XqcError;
};

// Regular grid of interpolation nodes co-located with lattice atoms.
struct RepatomGrid {
    int n_rep = 0;
    int reps_per_side = 0;
    double spacing_h = 1.0; // mm, integer multiple of the lattice spacing
    VecX positions_rep;     // 2*n_rep
    std::vector<int> atom_of_repatom;
    std::vector<int> enriched; // N*, ascending repatom index

    int rep_index(int ix, int iy) const { return iy * reps_per_side + ix; }
    Vec2 position(int b) const { return positions_rep.segment<2>(2 * b); }
};

RepatomGrid build_repatom_grid(const LatticeModel& lattice, double spacing_h);

// Per-repatom Gaussian locality parameter beta (mm^-2). gamma = beta * h^2 is
// the dimensionless form used throughout the solver internals.
struct LocalityField {
    enum class Mode { Uniform, Nonuniform, Pattern };
    VecX beta;
    double beta_min = 0.0;
    double beta_max = 0.0;
    Mode mode = Mode::Uniform;
};

LocalityField make_uniform_locality(const RepatomGrid& grid, double gamma,
                                    double gamma_min, double gamma_max);
VecX gamma_of(const LocalityField& field, double spacing_h);

struct LmeOptions {
    double prefactor_cutoff = 1e-12; // exp(-beta |x-x_b|^2) below this is dropped
    double residual_tol = 1e-10;     // dimensionless consistency residual
    int max_iterations = 100;
};

// Shape-function evaluation at one point. Support indices are ascending
// repatom ids; lambda and hessian_j are in h-scaled (dimensionless) form.
struct LmeEvaluation {
    int atom = -1;
    std::vector<int> support;
    VecX phi;
    Vec2 lambda = Vec2::Zero();
    Mat2 hessian_j = Mat2::Zero();
    int newton_iters = 0;
};

class LmeEvaluator {
public:
    LmeEvaluator(const RepatomGrid& grid, const LocalityField& locality,
                 LmeOptions opts = {});

    // Solves the dual problem for lambda* with the regularized Newton update
    // lambda <- lambda - (J + |r| I)^{-1} r, then normalizes the shape values.
    LmeEvaluation evaluate(const Vec2& point, const Vec2* warm_lambda = nullptr) const;

    // d(phi_a)/d(beta_b) for every support entry a, for one support position b.
    // Uses the converged-residual simplification of the Jacobian chain.
    VecX shape_beta_derivative(const LmeEvaluation& ev, const Vec2& point,
                               int wrt_support_pos) const;

    // Accumulates sum_a weights[a] * d(phi_a)/d(gamma_b) into grad_gamma[b] for
    // all support repatoms b of this evaluation in O(|support|).
    void accumulate_gamma_gradient(const LmeEvaluation& ev, const Vec2& point,
                                   const VecX& weights, VecX& grad_gamma) const;

    const RepatomGrid& grid() const { return *grid_; }
    const LocalityField& locality() const { return *locality_; }
    const LmeOptions& options() const { return opts_; }

private:
    void collect_support(const Vec2& point, std::vector<int>& support) const;

    const RepatomGrid* grid_;
    const LocalityField* locality_;
    LmeOptions opts_;
    VecX gamma_;       // per repatom
    double max_cut_r_; // support search radius in h units
};

// Shape functions of all repatoms at all atom sites, parallel over atoms.
// warm (optional) supplies previous-iterate lambdas per atom.
struct LmeField {
    std::vector<LmeEvaluation> evals; // indexed by atom
};

LmeField evaluate_at_atoms(const LatticeModel& lattice, const RepatomGrid& grid,
                           const LocalityField& locality, const LmeOptions& opts = {},
                           int workers = 0, const LmeField* warm = nullptr);

void write_lme_debug_csv(const LmeField& field, const std::string& path,
                         const std::vector<std::string>& provenance = {});

} // namespace xqc
