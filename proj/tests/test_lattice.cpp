#include "xqc/geometry.hpp"
#include "xqc/lattice.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace xqc;

namespace {

// Independent oracle: central finite difference of the assembled energy.
VecX fd_gradient(const LatticeModel& model, const VecX& positions, double step) {
    AssemblyOptions eo;
    eo.with_hessian = false;
    VecX grad(positions.size());
    VecX p = positions;
    for (int i = 0; i < positions.size(); ++i) {
        p[i] = positions[i] + step;
        const double ep = assemble_energy_gradient_hessian(model, p, eo).energy;
        p[i] = positions[i] - step;
        const double em = assemble_energy_gradient_hessian(model, p, eo).energy;
        p[i] = positions[i];
        grad[i] = (ep - em) / (2.0 * step);
    }
    return grad;
}

} // namespace

TEST_CASE("geometry signed distances") {
    const Circle circle{Vec2(-17.0, 0.0), 40.0};
    CHECK(signed_distance(circle, Vec2(23.0, 0.0)) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(signed_distance(circle, Vec2(-17.0, 0.0)) == doctest::Approx(-40.0));

    const Square square{Vec2(0.0, 0.0), 30.0};
    CHECK(signed_distance(square, Vec2(45.0, 0.0)) == doctest::Approx(15.0));
    CHECK(signed_distance(square, Vec2(0.0, 0.0)) == doctest::Approx(-30.0));
    CHECK(signed_distance(square, Vec2(30.0, 10.0)) == doctest::Approx(0.0).epsilon(1e-14));
    // Outside a corner the distance is diagonal.
    CHECK(signed_distance(square, Vec2(33.0, 34.0)) == doctest::Approx(5.0));

    const Segment seg{Vec2(-1.0, 0.0), Vec2(1.0, 0.0)};
    CHECK(signed_distance(seg, Vec2(0.0, 0.5)) == doctest::Approx(0.5));
    CHECK(signed_distance(seg, Vec2(2.0, 0.0)) == doctest::Approx(1.0));
    CHECK(signed_distance(seg, Vec2(0.3, 0.0)) == doctest::Approx(0.0).epsilon(1e-14));

    CHECK_THROWS_AS(validate(InterfaceGeometry(Circle{Vec2(0, 0), -1.0})), InvalidGeometryError);
}

TEST_CASE("3x3 lattice counts enumerated by hand") {
    const LatticeModel m = build_lattice(1.0, 1.0, {});
    CHECK(m.n_ato == 9);
    CHECK(m.interactions.size() == 20); // 6 horizontal + 6 vertical + 8 diagonal
    int horizontal = 0, vertical = 0, diagonal = 0;
    for (const auto& in : m.interactions) {
        const Vec2 d = m.atom_position0(in.beta) - m.atom_position0(in.alpha);
        if (d.y() == 0.0) ++horizontal;
        else if (d.x() == 0.0) ++vertical;
        else ++diagonal;
        CHECK(in.rest_length == doctest::Approx(d.norm()));
    }
    CHECK(horizontal == 6);
    CHECK(vertical == 6);
    CHECK(diagonal == 8);

    // Neighbor counts: interior 8, edges 5, corners 3.
    std::vector<int> degree(m.n_ato, 0);
    for (const auto& in : m.interactions) {
        ++degree[in.alpha];
        ++degree[in.beta];
    }
    CHECK(degree[m.atom_index(1, 1)] == 8);
    CHECK(degree[m.atom_index(0, 0)] == 3);
    CHECK(degree[m.atom_index(1, 0)] == 5);
}

TEST_CASE("benchmark-size lattice counts") {
    const LatticeModel m = build_lattice(128.0, 1.0, {});
    CHECK(m.n_ato == 257 * 257);
    CHECK(m.n_ato == 66049);
    CHECK(2 * m.n_ato == 132098);
    // closed form: 2 N (N-1) axis links + 2 (N-1)^2 diagonals, N = 257
    CHECK(m.interactions.size() == 262656);
}

TEST_CASE("invalid extent/spacing ratio") {
    CHECK_THROWS_AS(build_lattice(1.5, 1.0, {}), InvalidGeometryError);
}

TEST_CASE("interaction energy basics") {
    VecX pos(4);
    pos << 0.0, 0.0, 1.1, 0.0;
    Interaction in;
    in.alpha = 0;
    in.beta = 1;
    in.young_modulus = 1.0;
    in.area = 1.0;
    in.rest_length = 1.0;
    CHECK(interaction_energy(pos, in) == doctest::Approx(0.005));

    pos[2] = 1.0;
    CHECK(interaction_energy(pos, in) == doctest::Approx(0.0));

    // Rigid translation leaves the energy unchanged.
    pos[2] = 1.1;
    VecX shifted = pos;
    shifted[0] += 3.7;
    shifted[2] += 3.7;
    shifted[1] -= 1.2;
    shifted[3] -= 1.2;
    CHECK(interaction_energy(shifted, in) == doctest::Approx(interaction_energy(pos, in)));

    in.rest_length = 0.0;
    CHECK_THROWS_AS(interaction_energy(pos, in), InvalidGeometryError);
}

TEST_CASE("assembly at rest and under uniaxial bond stretch") {
    const LatticeModel m = build_lattice(2.0, 1.0, {});
    const Assembly a0 = assemble_energy_gradient_hessian(m, m.positions0);
    CHECK(a0.energy == doctest::Approx(0.0));
    CHECK(a0.gradient.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));

    // Single horizontal bond stretched by eps: end forces have magnitude E A eps.
    VecX pos(4);
    pos << 0.0, 0.0, 1.0, 0.0;
    LatticeModel two;
    two.n_ato = 2;
    two.atoms_per_side = 2;
    two.spacing = 1.0;
    two.positions0 = pos;
    Interaction in;
    in.alpha = 0;
    in.beta = 1;
    two.interactions.push_back(in);
    const double eps = 1e-3;
    VecX stretched = pos;
    stretched[2] += eps;
    const Assembly a1 = assemble_energy_gradient_hessian(two, stretched);
    CHECK(a1.gradient.segment<2>(2).norm() == doctest::Approx(eps).epsilon(1e-9));
    CHECK(a1.gradient.segment<2>(0).norm() == doctest::Approx(eps).epsilon(1e-9));
}

TEST_CASE("energy rigid-body invariance") {
    const LatticeModel m = build_lattice(2.0, 1.0, {});
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> perturb(-0.05, 0.05);
    VecX pos = m.positions0;
    for (int i = 0; i < pos.size(); ++i) pos[i] += perturb(rng);
    AssemblyOptions eo;
    eo.with_hessian = false;
    const double e0 = assemble_energy_gradient_hessian(m, pos, eo).energy;
    VecX shifted = pos;
    for (int a = 0; a < m.n_ato; ++a) {
        shifted[2 * a] += 11.3;
        shifted[2 * a + 1] -= 7.9;
    }
    const double e1 = assemble_energy_gradient_hessian(m, shifted, eo).energy;
    CHECK(std::abs(e1 - e0) <= 1e-12 * std::max(1.0, std::abs(e0)));
}

TEST_CASE("gradient matches central finite differences") {
    for (int half : {2, 4}) {
        const LatticeModel m = build_lattice(static_cast<double>(half), 1.0, {});
        std::mt19937 rng(7 + half);
        std::uniform_real_distribution<double> perturb(-0.02, 0.02);
        VecX pos = m.positions0;
        for (int i = 0; i < pos.size(); ++i) pos[i] += perturb(rng);
        const Assembly a = assemble_energy_gradient_hessian(m, pos);
        const VecX fd = fd_gradient(m, pos, 1e-6 * m.spacing);
        const double rel = (a.gradient - fd).norm() / fd.norm();
        CHECK(rel < 1e-6);
    }
}

TEST_CASE("hessian symmetry and positive semidefiniteness at rest") {
    const LatticeModel m = build_lattice(2.0, 1.0, {}); // 5x5
    const Assembly a = assemble_energy_gradient_hessian(m, m.positions0);
    const Eigen::MatrixXd k = Eigen::MatrixXd(a.hessian);
    CHECK((k - k.transpose()).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const double min_ev = es.eigenvalues().minCoeff();
    const double norm_k = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(min_ev >= -1e-10 * norm_k);
}

TEST_CASE("degenerate configuration error") {
    const LatticeModel m = build_lattice(1.0, 1.0, {});
    VecX pos = m.positions0;
    pos.segment<2>(2 * m.atom_index(1, 1)) = pos.segment<2>(2 * m.atom_index(0, 1));
    CHECK_THROWS_AS(assemble_energy_gradient_hessian(m, pos), DegenerateConfigurationError);
}

TEST_CASE("material assignment by midpoint rule and fiber endpoints") {
    MaterialRule rule;
    rule.interface = InterfaceGeometry(Circle{Vec2(0.0, 0.0), 1.5});
    rule.contrast = 10.0;
    const LatticeModel m = build_lattice(3.0, 1.0, rule);
    int stiff = 0;
    for (const auto& in : m.interactions) {
        const Vec2 mid =
            0.5 * (m.atom_position0(in.alpha) + m.atom_position0(in.beta));
        const bool inside = signed_distance(*rule.interface, mid) < 0.0;
        CHECK(in.young_modulus == doctest::Approx(inside ? 10.0 : 1.0));
        if (inside) ++stiff;
    }
    CHECK(stiff > 0);

    MaterialRule fiber_rule;
    fiber_rule.interface = InterfaceGeometry(Segment{Vec2(-2.0, -2.0), Vec2(2.0, 2.0)});
    fiber_rule.contrast = 100.0;
    const LatticeModel f = build_lattice(3.0, 1.0, fiber_rule);
    int fiber_links = 0;
    for (const auto& in : f.interactions)
        if (in.young_modulus > 1.0) ++fiber_links;
    // atoms (-2,-2)..(2,2) on the diagonal: 4 consecutive diagonal links
    CHECK(fiber_links == 4);
}

TEST_CASE("solve: zero prescribed displacement stays at rest") {
    const LatticeModel m = build_lattice(2.0, 1.0, {});
    const DirichletBc bc = make_uniaxial_bc(m, 0.0);
    const EquilibriumState st = solve_full(m, bc);
    CHECK(st.energy == doctest::Approx(0.0));
    CHECK((st.positions - m.positions0).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
}

TEST_CASE("homogeneous lattice under affine Dirichlet data deforms affinely") {
    // Affine BC on every boundary atom of a homogeneous X-braced lattice is an
    // exact equilibrium: each interior atom is the centroid of its neighbor
    // pattern, so the net force vanishes for any affine map.
    const LatticeModel m = build_lattice(1.0, 1.0, {});
    Eigen::Matrix2d fgrad;
    fgrad << 1.004, 0.0, 0.0, 0.997;

    DirichletBc bc;
    std::vector<double> vals;
    for (int side = 0; side < 4; ++side) {
        for (int a : m.gamma[side]) {
            for (int c = 0; c < 2; ++c) {
                const int dof = 2 * a + c;
                if (std::find(bc.dofs.begin(), bc.dofs.end(), dof) != bc.dofs.end()) continue;
                const Vec2 target = fgrad * m.atom_position0(a);
                bc.dofs.push_back(dof);
                vals.push_back(target[c] - m.positions0[dof]);
            }
        }
    }
    bc.values = Eigen::Map<VecX>(vals.data(), static_cast<Eigen::Index>(vals.size()));

    SolveOptions opts;
    opts.tolerance = 1e-12; // drive Newton below the 1e-10 assertion level
    const EquilibriumState st = solve_full(m, bc, opts);
    for (int a = 0; a < m.n_ato; ++a) {
        const Vec2 expect = fgrad * m.atom_position0(a);
        CHECK((st.positions.segment<2>(2 * a) - expect).norm() <=
              1e-10 * std::max(1.0, expect.norm()));
    }
}

TEST_CASE("nonconvergence error carries the residual") {
    const LatticeModel m = build_lattice(2.0, 1.0, {});
    const DirichletBc bc = make_uniaxial_bc(m, 0.2);
    SolveOptions opts;
    opts.max_iterations = 0;
    CHECK_THROWS_AS(solve_full(m, bc, opts), NonconvergenceError);
}

TEST_CASE("uniaxial bc layout") {
    const LatticeModel m = build_lattice(2.0, 1.0, {});
    const DirichletBc bc = make_uniaxial_bc(m, 0.1);
    // 16 boundary atoms fixed in x, 5 bottom + 5 top prescribed in y.
    CHECK(bc.dofs.size() == 16 + 10);
    const EquilibriumState st = solve_full(m, bc);
    // Stretched vertically: top row moved up by u_d.
    const int top_mid = m.atom_index(2, 4);
    CHECK(st.positions[2 * top_mid + 1] ==
          doctest::Approx(m.positions0[2 * top_mid + 1] + 0.1));
    CHECK(st.residual_norm <= default_tolerance(m));
}
