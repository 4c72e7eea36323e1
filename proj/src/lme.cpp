#include "xqc/lme.hpp"

#include "xqc/csv.hpp"
#include "xqc/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace xqc {

RepatomGrid build_repatom_grid(const LatticeModel& lattice, double spacing_h) {
    const double d = lattice.spacing;
    const double ratio = spacing_h / d;
    const double rounded = std::round(ratio);
    if (!(spacing_h > 0.0) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw InvalidGeometryError("repatom spacing must be an integer multiple of the lattice spacing");
    const int stride = static_cast<int>(rounded);
    if ((lattice.atoms_per_side - 1) % stride != 0)
        throw InvalidGeometryError("repatom spacing must divide the domain edge");

    RepatomGrid grid;
    grid.spacing_h = spacing_h;
    grid.reps_per_side = (lattice.atoms_per_side - 1) / stride + 1;
    grid.n_rep = grid.reps_per_side * grid.reps_per_side;
    grid.positions_rep.resize(2 * grid.n_rep);
    grid.atom_of_repatom.resize(grid.n_rep);
    for (int iy = 0; iy < grid.reps_per_side; ++iy) {
        for (int ix = 0; ix < grid.reps_per_side; ++ix) {
            const int b = grid.rep_index(ix, iy);
            const int atom = lattice.atom_index(ix * stride, iy * stride);
            grid.atom_of_repatom[b] = atom;
            grid.positions_rep.segment<2>(2 * b) = lattice.atom_position0(atom);
        }
    }
    return grid;
}

LocalityField make_uniform_locality(const RepatomGrid& grid, double gamma,
                                    double gamma_min, double gamma_max) {
    if (!(gamma_min < gamma_max))
        throw InvalidConfigError("gamma bounds must satisfy min < max");
    const double h2 = grid.spacing_h * grid.spacing_h;
    LocalityField field;
    field.beta = VecX::Constant(grid.n_rep, gamma / h2);
    field.beta_min = gamma_min / h2;
    field.beta_max = gamma_max / h2;
    field.mode = LocalityField::Mode::Uniform;
    return field;
}

VecX gamma_of(const LocalityField& field, double spacing_h) {
    return field.beta * (spacing_h * spacing_h);
}

LmeEvaluator::LmeEvaluator(const RepatomGrid& grid, const LocalityField& locality,
                           LmeOptions opts)
    : grid_(&grid), locality_(&locality), opts_(opts) {
    gamma_ = locality.beta * (grid.spacing_h * grid.spacing_h);
    const double gmin = gamma_.minCoeff();
    if (!(gmin > 0.0)) throw InvalidConfigError("locality parameters must be positive");
    max_cut_r_ = std::sqrt(-std::log(opts_.prefactor_cutoff) / gmin);
}

void LmeEvaluator::collect_support(const Vec2& point, std::vector<int>& support) const {
    const RepatomGrid& g = *grid_;
    const double h = g.spacing_h;
    const double x0 = g.positions_rep[0];
    const double y0 = g.positions_rep[1];
    const double log_cut = -std::log(opts_.prefactor_cutoff);

    const int ix_lo = std::max(0, static_cast<int>(std::ceil((point.x() - x0) / h - max_cut_r_)));
    const int ix_hi = std::min(g.reps_per_side - 1,
                               static_cast<int>(std::floor((point.x() - x0) / h + max_cut_r_)));
    const int iy_lo = std::max(0, static_cast<int>(std::ceil((point.y() - y0) / h - max_cut_r_)));
    const int iy_hi = std::min(g.reps_per_side - 1,
                               static_cast<int>(std::floor((point.y() - y0) / h + max_cut_r_)));

    support.clear();
    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
        for (int ix = ix_lo; ix <= ix_hi; ++ix) {
            const int b = g.rep_index(ix, iy);
            const Vec2 xi = (point - g.position(b)) / h;
            if (gamma_[b] * xi.squaredNorm() <= log_cut) support.push_back(b);
        }
    }
}

namespace {

// 2x2 symmetric solve with a small ridge when the matrix is near singular.
Vec2 solve_2x2(const Mat2& m, const Vec2& rhs, bool* singular = nullptr) {
    Mat2 a = m;
    const double scale = std::max({std::abs(a(0, 0)), std::abs(a(1, 1)), 1e-300});
    double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    if (std::abs(det) < 1e-13 * scale * scale) {
        const double ridge = 1e-12 * scale + 1e-300;
        a(0, 0) += ridge;
        a(1, 1) += ridge;
        det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
        if (singular) *singular = true;
    }
    return Vec2((rhs.x() * a(1, 1) - rhs.y() * a(0, 1)) / det,
                (rhs.y() * a(0, 0) - rhs.x() * a(1, 0)) / det);
}

} // namespace

LmeEvaluation LmeEvaluator::evaluate(const Vec2& point, const Vec2* warm_lambda) const {
    LmeEvaluation ev;
    collect_support(point, ev.support);
    if (ev.support.empty())
        throw LambdaNonconvergenceError("evaluation point has no repatom support", 0.0, 0);

    const int ns = static_cast<int>(ev.support.size());
    const double h = grid_->spacing_h;
    Eigen::ArrayXd xi_x(ns), xi_y(ns), base(ns);
    for (int i = 0; i < ns; ++i) {
        const int b = ev.support[i];
        const Vec2 xi = (point - grid_->position(b)) / h;
        xi_x[i] = xi.x();
        xi_y[i] = xi.y();
        base[i] = -gamma_[b] * xi.squaredNorm();
    }

    Vec2 lambda = warm_lambda ? *warm_lambda : Vec2::Zero();
    Eigen::ArrayXd w(ns);
    Vec2 residual;
    Mat2 jac;
    int iter = 0;
    for (;; ++iter) {
        const Eigen::ArrayXd f = base + lambda.x() * xi_x + lambda.y() * xi_y;
        w = (f - f.maxCoeff()).exp();
        w /= w.sum();
        residual.x() = (w * xi_x).sum();
        residual.y() = (w * xi_y).sum();
        const double sxx = (w * xi_x * xi_x).sum();
        const double sxy = (w * xi_x * xi_y).sum();
        const double syy = (w * xi_y * xi_y).sum();
        jac(0, 0) = sxx - residual.x() * residual.x();
        jac(0, 1) = sxy - residual.x() * residual.y();
        jac(1, 0) = jac(0, 1);
        jac(1, 1) = syy - residual.y() * residual.y();
        const double rnorm = residual.norm();
        if (rnorm <= opts_.residual_tol) break;
        if (iter >= opts_.max_iterations)
            throw LambdaNonconvergenceError(
                "shape-function Newton iteration exceeded the iteration limit", rnorm, iter);
        Mat2 reg = jac;
        reg(0, 0) += rnorm;
        reg(1, 1) += rnorm;
        lambda -= solve_2x2(reg, residual);
    }

    ev.phi = w.matrix();
    ev.lambda = lambda;
    ev.hessian_j = jac;
    ev.newton_iters = iter;
    return ev;
}

VecX LmeEvaluator::shape_beta_derivative(const LmeEvaluation& ev, const Vec2& point,
                                         int wrt_support_pos) const {
    const int ns = static_cast<int>(ev.support.size());
    const double h = grid_->spacing_h;
    const int b = ev.support[wrt_support_pos];
    const Vec2 xi_b = (point - grid_->position(b)) / h;
    const double dist2_b = xi_b.squaredNorm();
    const double phi_b = ev.phi[wrt_support_pos];

    bool singular = false;
    const Vec2 jinv_xib = solve_2x2(ev.hessian_j, xi_b, &singular);
    if (!jinv_xib.allFinite())
        throw DerivativeUnavailableError("shape-function Hessian is singular");

    VecX out(ns);
    const double h2 = h * h;
    for (int a = 0; a < ns; ++a) {
        const Vec2 xi_a = (point - grid_->position(ev.support[a])) / h;
        const double delta = (a == wrt_support_pos) ? 1.0 : 0.0;
        out[a] = h2 * ev.phi[a] * dist2_b * (phi_b * (xi_a.dot(jinv_xib) + 1.0) - delta);
    }
    return out;
}

void LmeEvaluator::accumulate_gamma_gradient(const LmeEvaluation& ev, const Vec2& point,
                                             const VecX& weights, VecX& grad_gamma) const {
    const int ns = static_cast<int>(ev.support.size());
    const double h = grid_->spacing_h;

    double sw = 0.0;
    Vec2 t = Vec2::Zero();
    for (int a = 0; a < ns; ++a) {
        const Vec2 xi_a = (point - grid_->position(ev.support[a])) / h;
        const double pw = ev.phi[a] * weights[a];
        sw += pw;
        t += pw * xi_a;
    }
    const Vec2 u = solve_2x2(ev.hessian_j, t);

    for (int b = 0; b < ns; ++b) {
        const Vec2 xi_b = (point - grid_->position(ev.support[b])) / h;
        grad_gamma[ev.support[b]] +=
            xi_b.squaredNorm() * ev.phi[b] * (u.dot(xi_b) + sw - weights[b]);
    }
}

LmeField evaluate_at_atoms(const LatticeModel& lattice, const RepatomGrid& grid,
                           const LocalityField& locality, const LmeOptions& opts,
                           int workers, const LmeField* warm) {
    LmeEvaluator evaluator(grid, locality, opts);
    LmeField field;
    field.evals.resize(lattice.n_ato);
    std::vector<std::string> failures(lattice.n_ato);

    parallel_for(
        0, lattice.n_ato,
        [&](std::int64_t a) {
            const Vec2 p = lattice.atom_position0(static_cast<int>(a));
            const Vec2* warm_lambda = nullptr;
            if (warm && warm->evals.size() == static_cast<size_t>(lattice.n_ato) &&
                warm->evals[a].atom == a)
                warm_lambda = &warm->evals[a].lambda;
            try {
                field.evals[a] = evaluator.evaluate(p, warm_lambda);
                field.evals[a].atom = static_cast<int>(a);
            } catch (const XqcError& e) {
                failures[a] = e.what();
            }
        },
        workers);

    for (int a = 0; a < lattice.n_ato; ++a)
        if (!failures[a].empty())
            throw AssemblyError("shape-function evaluation failed at atom " + std::to_string(a) +
                                ": " + failures[a]);
    return field;
}

void write_lme_debug_csv(const LmeField& field, const std::string& path,
                         const std::vector<std::string>& provenance) {
    CsvWriter w(path, "atom_id,lambda_x,lambda_y,iters,n_support", provenance);
    for (const LmeEvaluation& ev : field.evals) {
        w.row({std::to_string(ev.atom), format_double(ev.lambda.x()),
               format_double(ev.lambda.y()), std::to_string(ev.newton_iters),
               std::to_string(static_cast<int>(ev.support.size()))});
    }
}

} // namespace xqc
