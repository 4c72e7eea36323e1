#pragma once

#include "xqc/box_lbfgs.hpp"
#include "xqc/common.hpp"
#include "xqc/enrichment.hpp"
#include "xqc/geometry.hpp"
#include "xqc/lattice.hpp"
#include "xqc/lme.hpp"
#include "xqc/reduce.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace xqc {

class StaleStateError : public XqcError {
public:
    using XqcError::XqcError;
};

struct EnrichmentConfig {
    bool enabled = false;
    EnrichmentField::Kind kind = EnrichmentField::Kind::Sign;
    double radius_multiple = 2.5;
};

struct GammaField {
    enum class Provenance { Baseline, OptimizedUniform, OptimizedNonuniform, Pattern };
    VecX gamma; // per repatom, dimensionless
    Provenance provenance = Provenance::Baseline;
};

// Settings of the locality-parameter minimization (either a single shared
// gamma or one per repatom).
struct OptimizationProblem {
    LocalityField::Mode mode = LocalityField::Mode::Uniform;
    double gamma_min = 0.8;
    double gamma_max = 4.0;
    double gamma0 = 1.8;
    int max_outer_iterations = 200;
    double grad_tolerance_rel = 1e-6; // scaled by |Pi| / (gamma_max - gamma_min)
    double rel_decrease_tol = 1e-8;
};

// One QC configuration: lattice + repatom grid + optional interface with
// Heaviside enrichment + uniaxial loading. Evaluates the equilibrium energy
// and its locality-parameter gradient for candidate gamma fields. Not thread
// safe; use one instance per concurrent optimization.
class QcProblem {
public:
    QcProblem(const LatticeModel& lattice, double repatom_spacing,
              std::optional<InterfaceGeometry> geometry, EnrichmentConfig enrichment,
              double u_d, int workers = 0);

    struct Build {
        LocalityField locality;
        LmeField shapes;
        EnrichedBasis basis;
        bool has_enrichment = false;
        InterpolationMatrix phi;
    };

    // Both evaluation entry points warm-start from the previous call (lambda
    // per atom, reduced DOFs), which is why they are non-const.
    Build build(const VecX& gamma);
    std::pair<double, ReducedState> energy_of_gamma(const VecX& gamma,
                                                    Build* build_out = nullptr);

    // dPi/dgamma at a converged state (envelope theorem: only the explicit
    // Phi dependence contributes). Chains through the standard columns and,
    // via a reverse sweep, the orthonormalized enriched columns.
    VecX energy_gradient_gamma(const Build& build, const ReducedState& state) const;
    VecX energy_gradient_beta(const Build& build, const ReducedState& state) const;

    const LatticeModel& lattice() const { return *lattice_; }
    const RepatomGrid& repatoms() const { return grid_; }
    const std::vector<int>& enriched_repatoms() const { return enriched_; }
    const EnrichmentField* enrichment_field() const {
        return geometry_ ? &field_ : nullptr;
    }
    const DirichletBc& boundary_conditions() const { return bc_; }
    const std::optional<InterfaceGeometry>& geometry() const { return geometry_; }

    void set_gamma_bounds(double gamma_min, double gamma_max);
    void set_solve_options(const ReducedSolveOptions& opts) { solve_opts_ = opts; }
    const ReducedSolveOptions& solve_options() const { return solve_opts_; }
    int workers() const { return workers_; }

private:
    const LatticeModel* lattice_;
    RepatomGrid grid_;
    std::optional<InterfaceGeometry> geometry_;
    EnrichmentConfig enrich_cfg_;
    EnrichmentField field_;
    std::vector<int> enriched_;
    DirichletBc bc_;
    double gamma_min_ = 0.3;
    double gamma_max_ = 4.0;
    LmeOptions lme_opts_;
    ReducedSolveOptions solve_opts_;
    int workers_ = 0;
    LmeField warm_shapes_;
    VecX warm_q_;
};

struct OptimizeReport {
    GammaField gamma;
    double energy = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<BoxLbfgsIterate> trace;
};

OptimizeReport optimize_uniform(QcProblem& problem, const OptimizationProblem& settings);
OptimizeReport optimize_nonuniform(QcProblem& problem, const OptimizationProblem& settings,
                                   const VecX& gamma0_field);

// Pattern rule: gamma 0.8 within one repatom spacing of the interface, 2.0 in
// the far field (all 2.0 when there is no interface).
GammaField pattern_gamma(const RepatomGrid& repatoms,
                         const std::optional<InterfaceGeometry>& geometry);

void write_opt_trace_csv(const std::vector<BoxLbfgsIterate>& trace, const std::string& path,
                         const std::vector<std::string>& provenance = {});
void write_gamma_field_csv(const RepatomGrid& repatoms, const VecX& gamma,
                           const std::optional<InterfaceGeometry>& geometry,
                           const std::vector<int>& enriched, const std::string& path,
                           const std::vector<std::string>& provenance = {});

} // namespace xqc
