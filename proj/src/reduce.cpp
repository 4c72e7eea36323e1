#include "xqc/reduce.hpp"

#include "xqc/csv.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace xqc {

InterpolationMatrix assemble_phi(const LatticeModel& lattice, const RepatomGrid& repatoms,
                                 const LmeField& shape_values,
                                 const EnrichedBasis* enriched_basis) {
    InterpolationMatrix out;
    out.n_rep = repatoms.n_rep;
    out.n_enriched = enriched_basis ? enriched_basis->n_columns() : 0;

    std::vector<Triplet> tri;
    size_t nnz_guess = 0;
    for (const auto& ev : shape_values.evals) nnz_guess += 2 * ev.support.size();
    tri.reserve(nnz_guess + (enriched_basis ? 2 * enriched_basis->band.size() : 0));

    for (int a = 0; a < lattice.n_ato; ++a) {
        const LmeEvaluation& ev = shape_values.evals[a];
        if (ev.atom != a)
            throw AssemblyError("missing shape-function evaluation at atom " + std::to_string(a));
        for (size_t s = 0; s < ev.support.size(); ++s) {
            const int b = ev.support[s];
            tri.emplace_back(2 * a, out.standard_col(b, 0), ev.phi[s]);
            tri.emplace_back(2 * a + 1, out.standard_col(b, 1), ev.phi[s]);
        }
    }
    if (enriched_basis) {
        for (int j = 0; j < enriched_basis->n_columns(); ++j) {
            for (size_t p = 0; p < enriched_basis->band.size(); ++p) {
                const double v = enriched_basis->gson(static_cast<int>(p), j);
                if (v == 0.0) continue;
                const int a = enriched_basis->band[p];
                tri.emplace_back(2 * a, out.enriched_col(j, 0), v);
                tri.emplace_back(2 * a + 1, out.enriched_col(j, 1), v);
            }
        }
    }
    out.phi.resize(2 * lattice.n_ato, out.n_reduced_dofs());
    out.phi.setFromTriplets(tri.begin(), tri.end());
    return out;
}

DirichletBc make_uniaxial_bc_reduced(const RepatomGrid& repatoms, double u_d) {
    const int n = repatoms.reps_per_side;
    DirichletBc bc;
    std::vector<double> vals;
    auto on_boundary = [n](int ix, int iy) {
        return ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1;
    };
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            if (!on_boundary(ix, iy)) continue;
            const int b = repatoms.rep_index(ix, iy);
            bc.dofs.push_back(2 * b);
            vals.push_back(0.0);
            if (iy == 0) {
                bc.dofs.push_back(2 * b + 1);
                vals.push_back(-u_d);
            } else if (iy == n - 1) {
                bc.dofs.push_back(2 * b + 1);
                vals.push_back(u_d);
            }
        }
    }
    bc.values = Eigen::Map<VecX>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return bc;
}

ReducedState solve_reduced(const LatticeModel& lattice, const RepatomGrid& repatoms,
                           const InterpolationMatrix& phi, const DirichletBc& bc,
                           const ReducedSolveOptions& opts, const VecX* q0) {
    const int n_red = phi.n_reduced_dofs();
    const double tol = opts.tolerance > 0.0 ? opts.tolerance : default_tolerance(lattice);

    std::vector<char> prescribed(n_red, 0);
    for (int dof : bc.dofs) prescribed[dof] = 1;
    std::vector<int> free_map(n_red, -1);
    int n_free = 0;
    for (int i = 0; i < n_red; ++i)
        if (!prescribed[i]) free_map[i] = n_free++;

    VecX q_rest = VecX::Zero(n_red);
    q_rest.head(2 * repatoms.n_rep) = repatoms.positions_rep;

    VecX q = q_rest;
    if (q0 && q0->size() == n_red)
        for (int i = 0; i < n_red; ++i)
            if (!prescribed[i]) q[i] = (*q0)[i];

    ReducedState state;
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;
    const SpMat phi_t = phi.phi.transpose();

    AssemblyOptions energy_only;
    energy_only.with_hessian = false;

    for (int step = 1; step <= opts.load_steps; ++step) {
        const double frac = static_cast<double>(step) / opts.load_steps;
        for (size_t i = 0; i < bc.dofs.size(); ++i)
            q[bc.dofs[i]] = q_rest[bc.dofs[i]] + frac * bc.values[i];

        bool converged = false;
        double last_residual = 0.0;
        for (int iter = 0; iter <= opts.max_iterations; ++iter) {
            VecX positions = phi.phi * q;
            Assembly asm_full = assemble_energy_gradient_hessian(lattice, positions);
            VecX g_red = phi_t * asm_full.gradient;

            double res = 0.0;
            for (int i = 0; i < n_red; ++i)
                if (!prescribed[i]) res = std::max(res, std::abs(g_red[i]));
            last_residual = res;
            if (res <= tol) {
                state.energy = asm_full.energy;
                state.residual_norm = res;
                state.positions = std::move(positions);
                converged = true;
                break;
            }
            if (iter == opts.max_iterations) break;

            SpMat k_red = phi_t * (asm_full.hessian * phi.phi).eval();
            std::vector<Triplet> tri;
            tri.reserve(k_red.nonZeros());
            for (int col = 0; col < k_red.outerSize(); ++col) {
                if (prescribed[col]) continue;
                for (SpMat::InnerIterator it(k_red, col); it; ++it) {
                    if (prescribed[it.row()]) continue;
                    tri.emplace_back(free_map[it.row()], free_map[col], it.value());
                }
            }
            SpMat k_ff(n_free, n_free);
            k_ff.setFromTriplets(tri.begin(), tri.end());
            VecX rhs(n_free);
            for (int i = 0; i < n_red; ++i)
                if (!prescribed[i]) rhs[free_map[i]] = -g_red[i];

            if (!analyzed) {
                ldlt.analyzePattern(k_ff);
                analyzed = true;
            }
            ldlt.factorize(k_ff);
            if (ldlt.info() != Eigen::Success)
                throw NonconvergenceError("reduced stiffness factorization failed", res,
                                          state.iterations);
            if (iter == 0 && opts.condition_limit > 0.0) {
                const VecX d = ldlt.vectorD().cwiseAbs();
                const double dmin = d.minCoeff();
                const double dmax = d.maxCoeff();
                if (!(dmin > 0.0) || dmax / dmin > opts.condition_limit)
                    throw ConditioningError(
                        "reduced Hessian condition estimate exceeds the configured limit");
            }
            VecX dir = ldlt.solve(rhs);

            double alpha = 1.0;
            VecX q_trial = q;
            for (int ls = 0; ls <= opts.max_line_search; ++ls) {
                for (int i = 0; i < n_red; ++i)
                    if (!prescribed[i]) q_trial[i] = q[i] + alpha * dir[free_map[i]];
                try {
                    Assembly probe = assemble_energy_gradient_hessian(
                        lattice, phi.phi * q_trial, energy_only);
                    if (probe.energy <= asm_full.energy + 1e-12 * std::abs(asm_full.energy) ||
                        ls == opts.max_line_search) {
                        q = q_trial;
                        break;
                    }
                } catch (const DegenerateConfigurationError&) {
                    if (ls == opts.max_line_search) throw;
                }
                alpha *= 0.5;
            }
            ++state.iterations;
        }
        if (!converged)
            throw NonconvergenceError("reduced Newton solve did not converge", last_residual,
                                      state.iterations);
    }
    state.q = std::move(q);
    return state;
}

ErrorReport reconstruct_and_measure(const LatticeModel& lattice, const VecX& positions_qc,
                                    const VecX& positions_full) {
    const VecX u_qc = positions_qc - lattice.positions0;
    const VecX u_fs = positions_full - lattice.positions0;
    const double denom = u_fs.norm();
    if (denom == 0.0)
        throw UndefinedMetricError("reference displacement field is identically zero");

    ErrorReport report;
    report.eps_u = (u_qc - u_fs).norm() / denom;
    report.per_atom.resize(lattice.n_ato);
    for (int a = 0; a < lattice.n_ato; ++a) {
        const double nq = u_qc.segment<2>(2 * a).norm();
        const double nf = u_fs.segment<2>(2 * a).norm();
        report.per_atom[a] = std::abs(nq - nf);
    }
    return report;
}

void write_error_report_csv(const ErrorReport& report, const std::string& path,
                            const std::vector<std::string>& provenance) {
    CsvWriter w(path, "atom_id,eps_u_alpha", provenance);
    for (int a = 0; a < report.per_atom.size(); ++a)
        w.row({std::to_string(a), format_double(report.per_atom[a])});
}

} // namespace xqc
