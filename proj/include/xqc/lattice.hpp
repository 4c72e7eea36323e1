#pragma once

#include "xqc/common.hpp"
#include "xqc/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace xqc {

// Truss interaction between atoms alpha and beta (undirected, stored once).
struct Interaction {
    int alpha = 0;
    int beta = 0;
    double young_modulus = 1.0; // MPa
    double area = 1.0;          // mm^2
    double rest_length = 1.0;   // mm
};

// Assigns stiffness to interactions: links whose midpoint lies strictly inside
// a closed interface get contrast * matrix_modulus; for a fiber segment, links
// with both endpoints on the segment get the contrast.
struct MaterialRule {
    double matrix_modulus = 1.0;
    double area = 1.0;
    std::optional<InterfaceGeometry> interface;
    double contrast = 1.0;
    double on_interface_tol = 1e-9; // mm, for fiber endpoint tests
};

// X-braced square lattice: every interior atom has 8 neighbors (4 axis links,
// 4 cell diagonals).
struct LatticeModel {
    int n_ato = 0;
    int atoms_per_side = 0;
    double spacing = 1.0;     // d, mm
    double half_extent = 0.0; // domain is [-half_extent, half_extent]^2
    VecX positions0;          // 2*n_ato
    std::vector<Interaction> interactions;
    // Boundary index sets: gamma[0] bottom, gamma[1] right, gamma[2] top,
    // gamma[3] left. Corner atoms appear in both adjacent sets.
    std::vector<int> gamma[4];
    MaterialRule material;

    int atom_index(int ix, int iy) const { return iy * atoms_per_side + ix; }
    Vec2 atom_position0(int a) const { return positions0.segment<2>(2 * a); }
};

LatticeModel build_lattice(double domain_half_extent, double spacing,
                           const MaterialRule& material_rule);

// Strain energy of one interaction at the given configuration, Hookean truss:
// E A / (2 r0) * (r - r0)^2.
double interaction_energy(const VecX& positions, const Interaction& inter);

struct AssemblyOptions {
    double length_floor = 1e-12; // mm; shorter current lengths are an error
    bool with_hessian = true;
};

struct Assembly {
    double energy = 0.0;
    VecX gradient;      // dPi/dr, 2*n_ato
    SpMat hessian;      // symmetric, only if requested
};

Assembly assemble_energy_gradient_hessian(const LatticeModel& model,
                                          const VecX& positions,
                                          const AssemblyOptions& opts = {});

// Prescribed displacements applied incrementally over load steps.
struct DirichletBc {
    std::vector<int> dofs; // global dof ids (2*atom + component)
    VecX values;           // target displacement per dof, mm
};

// Default benchmark loading: X2 displacement -u_d on the bottom edge, +u_d on
// the top edge, X1 fixed on all four boundaries.
DirichletBc make_uniaxial_bc(const LatticeModel& model, double u_d);

struct SolveOptions {
    int load_steps = 1;
    int max_iterations = 50;
    double tolerance = -1.0; // <0: use 1e-8 * E_matrix * A / d
    int max_line_search = 30;
};

struct EquilibriumState {
    VecX positions;      // 2*n_ato
    double energy = 0.0; // mJ
    VecX internal_force; // dPi/dr at the solution
    double residual_norm = 0.0;
    int iterations = 0;
};

double default_tolerance(const LatticeModel& model);

EquilibriumState solve_full(const LatticeModel& model, const DirichletBc& bc,
                            const SolveOptions& opts = {});

VecX displacements(const LatticeModel& model, const VecX& positions);

void write_atoms_csv(const LatticeModel& model, const VecX& positions,
                     const std::string& path,
                     const std::vector<std::string>& provenance = {});
void write_interactions_csv(const LatticeModel& model, const std::string& path,
                            const std::vector<std::string>& provenance = {});

} // namespace xqc
