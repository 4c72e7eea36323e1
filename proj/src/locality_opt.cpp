#include "xqc/locality_opt.hpp"

#include "xqc/csv.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <unordered_map>

namespace xqc {

QcProblem::QcProblem(const LatticeModel& lattice, double repatom_spacing,
                     std::optional<InterfaceGeometry> geometry, EnrichmentConfig enrichment,
                     double u_d, int workers)
    : lattice_(&lattice),
      grid_(build_repatom_grid(lattice, repatom_spacing)),
      geometry_(std::move(geometry)),
      enrich_cfg_(enrichment),
      workers_(workers) {
    if (geometry_) {
        field_ = heaviside_values(*geometry_, lattice, enrich_cfg_.kind);
        if (enrich_cfg_.enabled) {
            enriched_ = select_enriched_repatoms(grid_, *geometry_, enrich_cfg_.radius_multiple);
            if (enriched_.empty())
                std::cerr << "warning: no repatoms within the enrichment radius; "
                             "proceeding without enrichment\n";
        }
    }
    grid_.enriched = enriched_;
    bc_ = make_uniaxial_bc_reduced(grid_, u_d);
}

void QcProblem::set_gamma_bounds(double gamma_min, double gamma_max) {
    if (!(gamma_min < gamma_max))
        throw InvalidConfigError("gamma bounds must satisfy min < max");
    gamma_min_ = gamma_min;
    gamma_max_ = gamma_max;
}

QcProblem::Build QcProblem::build(const VecX& gamma) {
    if (gamma.size() != grid_.n_rep)
        throw InvalidConfigError("gamma field size does not match the repatom count");

    Build out;
    const double h2 = grid_.spacing_h * grid_.spacing_h;
    out.locality.beta = gamma / h2;
    out.locality.beta_min = gamma_min_ / h2;
    out.locality.beta_max = gamma_max_ / h2;
    out.locality.mode = LocalityField::Mode::Nonuniform;

    out.shapes = evaluate_at_atoms(*lattice_, grid_, out.locality, lme_opts_, workers_,
                                   warm_shapes_.evals.empty() ? nullptr : &warm_shapes_);
    warm_shapes_ = out.shapes;

    out.has_enrichment = false;
    if (!enriched_.empty()) {
        out.basis = build_enriched_basis(*lattice_, grid_, out.shapes, field_, enriched_);
        out.has_enrichment = out.basis.n_columns() > 0;
    }
    out.phi = assemble_phi(*lattice_, grid_, out.shapes,
                           out.has_enrichment ? &out.basis : nullptr);
    return out;
}

std::pair<double, ReducedState> QcProblem::energy_of_gamma(const VecX& gamma, Build* build_out) {
    Build b = build(gamma);
    const VecX* q0 = warm_q_.size() == b.phi.n_reduced_dofs() ? &warm_q_ : nullptr;
    ReducedState state = solve_reduced(*lattice_, grid_, b.phi, bc_, solve_opts_, q0);
    warm_q_ = state.q;
    if (build_out) *build_out = std::move(b);
    return {state.energy, std::move(state)};
}

VecX QcProblem::energy_gradient_gamma(const Build& build, const ReducedState& state) const {
    const double tol = solve_opts_.tolerance > 0.0 ? solve_opts_.tolerance
                                                   : default_tolerance(*lattice_);
    if (state.residual_norm > 10.0 * tol)
        throw StaleStateError("energy gradient requires a converged equilibrium state");

    AssemblyOptions grad_only;
    grad_only.with_hessian = false;
    const Assembly asmres = assemble_energy_gradient_hessian(*lattice_, state.positions, grad_only);
    const VecX& f = asmres.gradient;

    // Reverse sweep through the Gram-Schmidt chain: cotangents on the GSON
    // columns are the enriched DOFs weighted by the internal forces.
    Eigen::MatrixXd pbar;
    std::vector<int> kept_col_of_rep;
    if (build.has_enrichment) {
        const EnrichedBasis& basis = build.basis;
        const int nb = static_cast<int>(basis.band.size());
        const int nk = basis.n_columns();
        Eigen::MatrixXd cbar(nb, nk);
        for (int k = 0; k < nk; ++k) {
            const double gx = state.q[build.phi.enriched_col(k, 0)];
            const double gy = state.q[build.phi.enriched_col(k, 1)];
            for (int p = 0; p < nb; ++p) {
                const int a = basis.band[p];
                cbar(p, k) = gx * f[2 * a] + gy * f[2 * a + 1];
            }
        }
        pbar = gram_schmidt_adjoint(basis, cbar);
        kept_col_of_rep.assign(grid_.n_rep, -1);
        for (int k = 0; k < nk; ++k)
            kept_col_of_rep[basis.order[basis.log.kept[k]]] = k;
    }

    LmeEvaluator evaluator(grid_, build.locality, lme_opts_);
    VecX grad = VecX::Zero(grid_.n_rep);
    VecX weights;
    for (int a = 0; a < lattice_->n_ato; ++a) {
        const LmeEvaluation& ev = build.shapes.evals[a];
        const int ns = static_cast<int>(ev.support.size());
        weights.resize(ns);
        const double fx = f[2 * a];
        const double fy = f[2 * a + 1];
        for (int s = 0; s < ns; ++s) {
            const int b = ev.support[s];
            weights[s] = state.q[2 * b] * fx + state.q[2 * b + 1] * fy;
        }
        if (build.has_enrichment) {
            const int p = build.basis.band_pos(a);
            if (p >= 0) {
                for (int s = 0; s < ns; ++s) {
                    const int k = kept_col_of_rep[ev.support[s]];
                    if (k < 0) continue;
                    const int raw = build.basis.log.kept[k];
                    weights[s] += pbar(p, k) * (field_.chi[a] - build.basis.chi_rep[raw]);
                }
            }
        }
        evaluator.accumulate_gamma_gradient(ev, lattice_->atom_position0(a), weights, grad);
    }
    return grad;
}

VecX QcProblem::energy_gradient_beta(const Build& build, const ReducedState& state) const {
    return energy_gradient_gamma(build, state) * (grid_.spacing_h * grid_.spacing_h);
}

namespace {

BoxLbfgsOptions make_lbfgs_options(const OptimizationProblem& settings) {
    BoxLbfgsOptions opts;
    opts.memory = 10;
    opts.max_iterations = settings.max_outer_iterations;
    opts.grad_tolerance_rel_f =
        settings.grad_tolerance_rel / (settings.gamma_max - settings.gamma_min);
    opts.rel_decrease_tol = settings.rel_decrease_tol;
    return opts;
}

} // namespace

OptimizeReport optimize_uniform(QcProblem& problem, const OptimizationProblem& settings) {
    problem.set_gamma_bounds(settings.gamma_min, settings.gamma_max);
    const int n_rep = problem.repatoms().n_rep;

    BoxObjective objective = [&](const VecX& x, VecX& grad) {
        const VecX gamma = VecX::Constant(n_rep, x[0]);
        QcProblem::Build build;
        auto [energy, state] = problem.energy_of_gamma(gamma, &build);
        grad.resize(1);
        grad[0] = problem.energy_gradient_gamma(build, state).sum();
        return energy;
    };

    VecX x0(1), lo(1), hi(1);
    x0[0] = settings.gamma0;
    lo[0] = settings.gamma_min;
    hi[0] = settings.gamma_max;
    BoxLbfgsResult res = box_lbfgs_minimize(objective, x0, lo, hi, make_lbfgs_options(settings));

    OptimizeReport report;
    report.gamma.gamma = VecX::Constant(n_rep, res.x[0]);
    report.gamma.provenance = GammaField::Provenance::OptimizedUniform;
    report.energy = res.f;
    report.iterations = res.iterations;
    report.converged = res.converged;
    report.trace = std::move(res.history);
    return report;
}

OptimizeReport optimize_nonuniform(QcProblem& problem, const OptimizationProblem& settings,
                                   const VecX& gamma0_field) {
    problem.set_gamma_bounds(settings.gamma_min, settings.gamma_max);
    const int n_rep = problem.repatoms().n_rep;
    if (gamma0_field.size() != n_rep)
        throw InvalidConfigError("gamma start field size does not match the repatom count");

    BoxObjective objective = [&](const VecX& x, VecX& grad) {
        QcProblem::Build build;
        auto [energy, state] = problem.energy_of_gamma(x, &build);
        grad = problem.energy_gradient_gamma(build, state);
        return energy;
    };

    const VecX lo = VecX::Constant(n_rep, settings.gamma_min);
    const VecX hi = VecX::Constant(n_rep, settings.gamma_max);
    BoxLbfgsResult res =
        box_lbfgs_minimize(objective, gamma0_field, lo, hi, make_lbfgs_options(settings));

    OptimizeReport report;
    report.gamma.gamma = std::move(res.x);
    report.gamma.provenance = GammaField::Provenance::OptimizedNonuniform;
    report.energy = res.f;
    report.iterations = res.iterations;
    report.converged = res.converged;
    report.trace = std::move(res.history);
    return report;
}

GammaField pattern_gamma(const RepatomGrid& repatoms,
                         const std::optional<InterfaceGeometry>& geometry) {
    GammaField field;
    field.provenance = GammaField::Provenance::Pattern;
    field.gamma.resize(repatoms.n_rep);
    for (int b = 0; b < repatoms.n_rep; ++b) {
        double gamma = 2.0;
        if (geometry) {
            const double psi = signed_distance(*geometry, repatoms.position(b));
            if (std::abs(psi) <= repatoms.spacing_h) gamma = 0.8;
        }
        field.gamma[b] = gamma;
    }
    return field;
}

void write_opt_trace_csv(const std::vector<BoxLbfgsIterate>& trace, const std::string& path,
                         const std::vector<std::string>& provenance) {
    CsvWriter w(path, "iter,energy,proj_grad_norm", provenance);
    for (const auto& row : trace)
        w.row({std::to_string(row.iter), format_double(row.f), format_double(row.proj_grad_norm)});
}

void write_gamma_field_csv(const RepatomGrid& repatoms, const VecX& gamma,
                           const std::optional<InterfaceGeometry>& geometry,
                           const std::vector<int>& enriched, const std::string& path,
                           const std::vector<std::string>& provenance) {
    std::vector<char> is_enriched(repatoms.n_rep, 0);
    for (int b : enriched) is_enriched[b] = 1;
    CsvWriter w(path, "repatom_id,x,y,psi,gamma,enriched_flag", provenance);
    for (int b = 0; b < repatoms.n_rep; ++b) {
        const Vec2 p = repatoms.position(b);
        const double psi = geometry ? signed_distance(*geometry, p) : 0.0;
        w.row({std::to_string(b), format_double(p.x()), format_double(p.y()),
               format_double(psi), format_double(gamma[b]),
               std::to_string(static_cast<int>(is_enriched[b]))});
    }
}

} // namespace xqc
