#include "xqc/lattice.hpp"

#include "xqc/csv.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <set>

namespace xqc {

namespace {

double link_modulus(const MaterialRule& rule, const Vec2& a, const Vec2& b) {
    if (!rule.interface) return rule.matrix_modulus;
    const InterfaceGeometry& geom = *rule.interface;
    if (is_closed(geom)) {
        const Vec2 mid = 0.5 * (a + b);
        if (signed_distance(geom, mid) < 0.0) return rule.contrast * rule.matrix_modulus;
    } else {
        if (signed_distance(geom, a) <= rule.on_interface_tol &&
            signed_distance(geom, b) <= rule.on_interface_tol)
            return rule.contrast * rule.matrix_modulus;
    }
    return rule.matrix_modulus;
}

} // namespace

LatticeModel build_lattice(double domain_half_extent, double spacing,
                           const MaterialRule& material_rule) {
    if (!(spacing > 0.0) || !(domain_half_extent > 0.0))
        throw InvalidGeometryError("spacing and half extent must be positive");
    const double ratio = domain_half_extent / spacing;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw InvalidGeometryError("domain half extent must be an integer multiple of the spacing");
    if (material_rule.interface) validate(*material_rule.interface);

    const int half_cells = static_cast<int>(rounded);
    const int n = 2 * half_cells + 1;

    LatticeModel model;
    model.atoms_per_side = n;
    model.n_ato = n * n;
    model.spacing = spacing;
    model.half_extent = domain_half_extent;
    model.material = material_rule;
    model.positions0.resize(2 * model.n_ato);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const int a = model.atom_index(ix, iy);
            model.positions0[2 * a] = -domain_half_extent + ix * spacing;
            model.positions0[2 * a + 1] = -domain_half_extent + iy * spacing;
        }
    }

    auto add_link = [&](int a, int b) {
        const Vec2 pa = model.atom_position0(a);
        const Vec2 pb = model.atom_position0(b);
        Interaction inter;
        inter.alpha = a;
        inter.beta = b;
        inter.area = material_rule.area;
        inter.rest_length = (pb - pa).norm();
        inter.young_modulus = link_modulus(material_rule, pa, pb);
        model.interactions.push_back(inter);
    };

    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const int a = model.atom_index(ix, iy);
            if (ix + 1 < n) add_link(a, model.atom_index(ix + 1, iy));
            if (iy + 1 < n) add_link(a, model.atom_index(ix, iy + 1));
            if (ix + 1 < n && iy + 1 < n) add_link(a, model.atom_index(ix + 1, iy + 1));
            if (ix > 0 && iy + 1 < n) add_link(a, model.atom_index(ix - 1, iy + 1));
        }
    }

    for (int ix = 0; ix < n; ++ix) {
        model.gamma[0].push_back(model.atom_index(ix, 0));
        model.gamma[2].push_back(model.atom_index(ix, n - 1));
    }
    for (int iy = 0; iy < n; ++iy) {
        model.gamma[1].push_back(model.atom_index(n - 1, iy));
        model.gamma[3].push_back(model.atom_index(0, iy));
    }
    return model;
}

double interaction_energy(const VecX& positions, const Interaction& inter) {
    if (!(inter.rest_length > 0.0))
        throw InvalidGeometryError("interaction rest length must be positive");
    const Vec2 pa = positions.segment<2>(2 * inter.alpha);
    const Vec2 pb = positions.segment<2>(2 * inter.beta);
    const double r = (pb - pa).norm();
    const double dr = r - inter.rest_length;
    return inter.young_modulus * inter.area / (2.0 * inter.rest_length) * dr * dr;
}

Assembly assemble_energy_gradient_hessian(const LatticeModel& model,
                                          const VecX& positions,
                                          const AssemblyOptions& opts) {
    if (positions.size() != 2 * model.n_ato)
        throw AssemblyError("positions vector has wrong size");

    Assembly out;
    out.gradient = VecX::Zero(2 * model.n_ato);
    std::vector<Triplet> triplets;
    if (opts.with_hessian) triplets.reserve(model.interactions.size() * 16);

    for (const Interaction& inter : model.interactions) {
        const int a = inter.alpha;
        const int b = inter.beta;
        const Vec2 pa = positions.segment<2>(2 * a);
        const Vec2 pb = positions.segment<2>(2 * b);
        const Vec2 diff = pb - pa;
        const double r = diff.norm();
        if (r < opts.length_floor)
            throw DegenerateConfigurationError(
                "interaction " + std::to_string(a) + "-" + std::to_string(b) +
                " collapsed below the length floor");
        const double k = inter.young_modulus * inter.area / inter.rest_length;
        const double dr = r - inter.rest_length;
        out.energy += 0.5 * k * dr * dr;

        const Vec2 t = diff / r;
        const Vec2 f = k * dr * t; // force conjugate to r^beta
        out.gradient.segment<2>(2 * b) += f;
        out.gradient.segment<2>(2 * a) -= f;

        if (opts.with_hessian) {
            const Mat2 block =
                k * (t * t.transpose() + (dr / r) * (Mat2::Identity() - t * t.transpose()));
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    const double v = block(i, j);
                    triplets.emplace_back(2 * a + i, 2 * a + j, v);
                    triplets.emplace_back(2 * b + i, 2 * b + j, v);
                    triplets.emplace_back(2 * a + i, 2 * b + j, -v);
                    triplets.emplace_back(2 * b + i, 2 * a + j, -v);
                }
            }
        }
    }
    if (opts.with_hessian) {
        out.hessian.resize(2 * model.n_ato, 2 * model.n_ato);
        out.hessian.setFromTriplets(triplets.begin(), triplets.end());
    }
    return out;
}

DirichletBc make_uniaxial_bc(const LatticeModel& model, double u_d) {
    std::set<int> x_fixed;
    for (int side = 0; side < 4; ++side)
        for (int a : model.gamma[side]) x_fixed.insert(a);

    DirichletBc bc;
    std::vector<double> vals;
    for (int a : x_fixed) {
        bc.dofs.push_back(2 * a);
        vals.push_back(0.0);
    }
    for (int a : model.gamma[0]) {
        bc.dofs.push_back(2 * a + 1);
        vals.push_back(-u_d);
    }
    for (int a : model.gamma[2]) {
        bc.dofs.push_back(2 * a + 1);
        vals.push_back(u_d);
    }
    bc.values = Eigen::Map<VecX>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return bc;
}

double default_tolerance(const LatticeModel& model) {
    return 1e-8 * model.material.matrix_modulus * model.material.area / model.spacing;
}

VecX displacements(const LatticeModel& model, const VecX& positions) {
    return positions - model.positions0;
}

EquilibriumState solve_full(const LatticeModel& model, const DirichletBc& bc,
                            const SolveOptions& opts) {
    const int ndof = 2 * model.n_ato;
    const double tol = opts.tolerance > 0.0 ? opts.tolerance : default_tolerance(model);

    std::vector<char> prescribed(ndof, 0);
    for (int dof : bc.dofs) prescribed[dof] = 1;
    std::vector<int> free_map(ndof, -1);
    int n_free = 0;
    for (int i = 0; i < ndof; ++i)
        if (!prescribed[i]) free_map[i] = n_free++;
    if (n_free == ndof)
        throw AssemblyError("boundary conditions leave rigid-body modes unconstrained");

    VecX positions = model.positions0;
    EquilibriumState state;
    state.iterations = 0;

    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;

    for (int step = 1; step <= opts.load_steps; ++step) {
        const double frac = static_cast<double>(step) / opts.load_steps;
        for (size_t i = 0; i < bc.dofs.size(); ++i)
            positions[bc.dofs[i]] = model.positions0[bc.dofs[i]] + frac * bc.values[i];

        bool converged = false;
        double last_residual = 0.0;
        for (int iter = 0; iter <= opts.max_iterations; ++iter) {
            Assembly asm_full = assemble_energy_gradient_hessian(model, positions);

            double res = 0.0;
            for (int i = 0; i < ndof; ++i)
                if (!prescribed[i]) res = std::max(res, std::abs(asm_full.gradient[i]));
            last_residual = res;
            if (res <= tol) {
                state.energy = asm_full.energy;
                state.internal_force = std::move(asm_full.gradient);
                state.residual_norm = res;
                converged = true;
                break;
            }
            if (iter == opts.max_iterations) break;

            // Reduce to free DOFs.
            std::vector<Triplet> tri;
            tri.reserve(asm_full.hessian.nonZeros());
            for (int col = 0; col < asm_full.hessian.outerSize(); ++col) {
                if (prescribed[col]) continue;
                for (SpMat::InnerIterator it(asm_full.hessian, col); it; ++it) {
                    if (prescribed[it.row()]) continue;
                    tri.emplace_back(free_map[it.row()], free_map[col], it.value());
                }
            }
            SpMat k_ff(n_free, n_free);
            k_ff.setFromTriplets(tri.begin(), tri.end());
            VecX rhs(n_free);
            for (int i = 0; i < ndof; ++i)
                if (!prescribed[i]) rhs[free_map[i]] = -asm_full.gradient[i];

            if (!analyzed) {
                ldlt.analyzePattern(k_ff);
                analyzed = true;
            }
            ldlt.factorize(k_ff);
            if (ldlt.info() != Eigen::Success)
                throw NonconvergenceError("stiffness factorization failed", res, state.iterations);
            VecX dir = ldlt.solve(rhs);

            // Backtrack on the energy if the full step overshoots.
            double alpha = 1.0;
            VecX trial = positions;
            for (int ls = 0; ls <= opts.max_line_search; ++ls) {
                for (int i = 0; i < ndof; ++i)
                    if (!prescribed[i]) trial[i] = positions[i] + alpha * dir[free_map[i]];
                AssemblyOptions eo;
                eo.with_hessian = false;
                try {
                    Assembly probe = assemble_energy_gradient_hessian(model, trial, eo);
                    if (probe.energy <= asm_full.energy + 1e-12 * std::abs(asm_full.energy) ||
                        ls == opts.max_line_search) {
                        positions = trial;
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
            throw NonconvergenceError("Newton solve did not converge", last_residual,
                                      state.iterations);
    }
    state.positions = std::move(positions);
    return state;
}

void write_atoms_csv(const LatticeModel& model, const VecX& positions,
                     const std::string& path,
                     const std::vector<std::string>& provenance) {
    CsvWriter w(path, "atom_id,x0,y0,x,y,ux,uy", provenance);
    for (int a = 0; a < model.n_ato; ++a) {
        const double x0 = model.positions0[2 * a];
        const double y0 = model.positions0[2 * a + 1];
        const double x = positions[2 * a];
        const double y = positions[2 * a + 1];
        w.row({std::to_string(a), format_double(x0), format_double(y0), format_double(x),
               format_double(y), format_double(x - x0), format_double(y - y0)});
    }
}

void write_interactions_csv(const LatticeModel& model, const std::string& path,
                            const std::vector<std::string>& provenance) {
    CsvWriter w(path, "id,alpha,beta,E,A,r0", provenance);
    for (size_t i = 0; i < model.interactions.size(); ++i) {
        const Interaction& in = model.interactions[i];
        w.row({std::to_string(i), std::to_string(in.alpha), std::to_string(in.beta),
               format_double(in.young_modulus), format_double(in.area),
               format_double(in.rest_length)});
    }
}

} // namespace xqc
