#pragma once

#include "xqc/common.hpp"
#include "xqc/geometry.hpp"
#include "xqc/lattice.hpp"
#include "xqc/lme.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace xqc {

// Signed distance and Heaviside values at every atom. Sign kind: -0.5 inside,
// 0 on the interface, +0.5 outside. Step kind: +0.5 exactly on the interface
// (fiber atoms), 0 elsewhere.
struct EnrichmentField {
    enum class Kind { Sign, Step };
    Kind kind = Kind::Sign;
    VecX psi;
    VecX chi;
};

EnrichmentField heaviside_values(const InterfaceGeometry& geometry,
                                 const LatticeModel& lattice, EnrichmentField::Kind kind,
                                 double on_interface_tol = 1e-9);

// Repatoms within radius_multiple * h of the interface, ascending index.
std::vector<int> select_enriched_repatoms(const RepatomGrid& repatoms,
                                          const InterfaceGeometry& geometry,
                                          double radius_multiple);

// Orthonormalization bookkeeping kept for the derivative chain: projection
// coefficients and pre-normalization norms per kept column.
struct GramLog {
    std::vector<int> kept;    // raw column index of each kept column
    std::vector<int> dropped; // raw column indices removed as dependent
    std::vector<double> norms;
    std::vector<std::vector<double>> proj; // proj[j][i], i over kept columns before j
};

// Enriched basis columns over a band of atoms (sorted union of the raw column
// supports). Columns are scalar per atom; the interpolation matrix places them
// on both coordinate rows.
struct EnrichedBasis {
    std::vector<int> order;      // enriched repatom per raw column (N* order)
    VecX chi_rep;                // chi at each enriched repatom
    std::vector<int> band;       // sorted atom ids
    Eigen::MatrixXd raw;         // band x n_raw
    Eigen::MatrixXd gson;        // band x n_kept, pairwise orthonormal
    GramLog log;

    int n_columns() const { return static_cast<int>(gson.cols()); }
    int band_pos(int atom) const;
};

// Raw columns phi_star_j(atom) = phi_{b_j}(atom) * (chi(atom) - chi(b_j)),
// then modified Gram-Schmidt in the given order. Columns whose residual norm
// falls below drop_tol times their raw norm are dropped.
EnrichedBasis build_enriched_basis(const LatticeModel& lattice, const RepatomGrid& repatoms,
                                   const LmeField& shape_values, const EnrichmentField& field,
                                   const std::vector<int>& enriched_repatoms,
                                   double drop_tol = 1e-8);

// Forward-mode derivative of all kept GSON columns with respect to beta of one
// repatom; chains through the raw columns and the Gram-Schmidt recurrence.
Eigen::MatrixXd enriched_beta_derivative(const EnrichedBasis& basis, const LmeField& shape_values,
                                         const EnrichmentField& field,
                                         const LmeEvaluator& evaluator,
                                         const LatticeModel& lattice, int wrt_repatom);

// Reverse-mode companion: given cotangents cbar on the kept GSON columns,
// returns pbar on the kept raw columns such that for any parameter s,
// sum_j <d gson_j/ds, cbar_j> = sum_j <d raw_kept_j/ds, pbar_j>.
Eigen::MatrixXd gram_schmidt_adjoint(const EnrichedBasis& basis, const Eigen::MatrixXd& cbar);

void write_enrichment_field_csv(const EnrichmentField& field, const std::string& path,
                                const std::vector<std::string>& provenance = {});
void write_enriched_basis_csv(const EnrichedBasis& basis, const std::string& path,
                              const std::vector<std::string>& provenance = {});

} // namespace xqc
