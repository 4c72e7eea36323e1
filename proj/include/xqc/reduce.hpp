#pragma once

#include "xqc/common.hpp"
#include "xqc/enrichment.hpp"
#include "xqc/lattice.hpp"
#include "xqc/lme.hpp"

#include <string>
#include <vector>

namespace xqc {

// Global interpolation matrix Phi = [Phi_std, Phi_enriched]. Scalar shape
// values are placed on both coordinate rows of an atom (checkerboard layout):
// column pair (2b, 2b+1) for standard repatom b, then pairs for each kept
// enriched column.
struct InterpolationMatrix {
    SpMat phi; // (2 n_ato) x (2 n_rep + 2 n_enriched)
    int n_rep = 0;
    int n_enriched = 0;

    int n_reduced_dofs() const { return 2 * (n_rep + n_enriched); }
    int standard_col(int repatom, int comp) const { return 2 * repatom + comp; }
    int enriched_col(int j, int comp) const { return 2 * (n_rep + j) + comp; }
};

InterpolationMatrix assemble_phi(const LatticeModel& lattice, const RepatomGrid& repatoms,
                                 const LmeField& shape_values,
                                 const EnrichedBasis* enriched_basis = nullptr);

// Boundary conditions on standard repatom DOFs (enriched DOFs stay free):
// X1 fixed on all boundary repatoms, X2 prescribed -u_d / +u_d on the bottom /
// top rows.
DirichletBc make_uniaxial_bc_reduced(const RepatomGrid& repatoms, double u_d);

struct ReducedSolveOptions {
    int load_steps = 1;
    int max_iterations = 50;
    double tolerance = -1.0; // <0: default_tolerance(lattice)
    int max_line_search = 30;
    double condition_limit = 1e14;
};

struct ReducedState {
    VecX q;         // repatom positions followed by enriched DOFs
    VecX positions; // reconstructed atom positions, Phi * q
    double energy = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
};

// Minimizes the lattice energy over the reduced DOFs with Newton iterations:
// gradient Phi^T f_int, Hessian Phi^T K Phi. q0 (optional) warm-starts the
// free DOFs.
ReducedState solve_reduced(const LatticeModel& lattice, const RepatomGrid& repatoms,
                           const InterpolationMatrix& phi, const DirichletBc& bc,
                           const ReducedSolveOptions& opts = {}, const VecX* q0 = nullptr);

struct ErrorReport {
    double eps_u = 0.0; // ||u_qc - u_fs|| / ||u_fs||
    VecX per_atom;      // | |u_qc,a| - |u_fs,a| |
};

ErrorReport reconstruct_and_measure(const LatticeModel& lattice, const VecX& positions_qc,
                                    const VecX& positions_full);

void write_error_report_csv(const ErrorReport& report, const std::string& path,
                            const std::vector<std::string>& provenance = {});

} // namespace xqc
