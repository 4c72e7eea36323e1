#include "xqc/enrichment.hpp"

#include "xqc/csv.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace xqc {

EnrichmentField heaviside_values(const InterfaceGeometry& geometry,
                                 const LatticeModel& lattice, EnrichmentField::Kind kind,
                                 double on_interface_tol) {
    EnrichmentField field;
    field.kind = kind;
    field.psi.resize(lattice.n_ato);
    field.chi.resize(lattice.n_ato);
    for (int a = 0; a < lattice.n_ato; ++a) {
        const double psi = signed_distance(geometry, lattice.atom_position0(a));
        field.psi[a] = psi;
        if (kind == EnrichmentField::Kind::Sign) {
            field.chi[a] = psi < 0.0 ? -0.5 : (psi > 0.0 ? 0.5 : 0.0);
        } else {
            field.chi[a] = std::abs(psi) <= on_interface_tol ? 0.5 : 0.0;
        }
    }
    return field;
}

std::vector<int> select_enriched_repatoms(const RepatomGrid& repatoms,
                                          const InterfaceGeometry& geometry,
                                          double radius_multiple) {
    if (!(radius_multiple > 0.0))
        throw InvalidConfigError("enrichment radius multiple must be positive");
    const double radius = radius_multiple * repatoms.spacing_h;
    std::vector<int> enriched;
    for (int b = 0; b < repatoms.n_rep; ++b) {
        if (std::abs(signed_distance(geometry, repatoms.position(b))) <= radius)
            enriched.push_back(b);
    }
    return enriched;
}

int EnrichedBasis::band_pos(int atom) const {
    auto it = std::lower_bound(band.begin(), band.end(), atom);
    if (it == band.end() || *it != atom) return -1;
    return static_cast<int>(it - band.begin());
}

EnrichedBasis build_enriched_basis(const LatticeModel& lattice, const RepatomGrid& repatoms,
                                   const LmeField& shape_values, const EnrichmentField& field,
                                   const std::vector<int>& enriched_repatoms,
                                   double drop_tol) {
    EnrichedBasis basis;
    basis.order = enriched_repatoms;
    const int n_raw = static_cast<int>(enriched_repatoms.size());
    basis.chi_rep.resize(n_raw);
    if (n_raw == 0) return basis;

    std::unordered_map<int, int> col_of_rep;
    col_of_rep.reserve(enriched_repatoms.size());
    for (int j = 0; j < n_raw; ++j) {
        basis.chi_rep[j] = field.chi[repatoms.atom_of_repatom[enriched_repatoms[j]]];
        col_of_rep[enriched_repatoms[j]] = j;
    }

    // Sparse raw entries, atom-major so the band comes out sorted.
    std::vector<std::vector<std::pair<int, double>>> entries(n_raw);
    std::vector<int> band;
    for (int a = 0; a < lattice.n_ato; ++a) {
        const LmeEvaluation& ev = shape_values.evals[a];
        bool in_band = false;
        for (size_t s = 0; s < ev.support.size(); ++s) {
            auto it = col_of_rep.find(ev.support[s]);
            if (it == col_of_rep.end()) continue;
            const int j = it->second;
            const double value = ev.phi[s] * (field.chi[a] - basis.chi_rep[j]);
            if (value != 0.0) {
                entries[j].emplace_back(a, value);
                in_band = true;
            }
        }
        if (in_band) band.push_back(a);
    }
    basis.band = std::move(band);

    const int nb = static_cast<int>(basis.band.size());
    basis.raw = Eigen::MatrixXd::Zero(nb, n_raw);
    for (int j = 0; j < n_raw; ++j)
        for (const auto& [atom, value] : entries[j])
            basis.raw(basis.band_pos(atom), j) = value;

    // Modified Gram-Schmidt with dependent-column dropping.
    std::vector<Eigen::VectorXd> kept_cols;
    for (int j = 0; j < n_raw; ++j) {
        Eigen::VectorXd v = basis.raw.col(j);
        const double raw_norm = v.norm();
        std::vector<double> coeffs;
        coeffs.reserve(kept_cols.size());
        for (const Eigen::VectorXd& c : kept_cols) {
            const double s = v.dot(c);
            coeffs.push_back(s);
            v -= s * c;
        }
        const double norm = v.norm();
        if (raw_norm == 0.0 || norm < drop_tol * raw_norm) {
            basis.log.dropped.push_back(j);
            continue;
        }
        v /= norm;
        kept_cols.push_back(std::move(v));
        basis.log.kept.push_back(j);
        basis.log.norms.push_back(norm);
        basis.log.proj.push_back(std::move(coeffs));
    }
    if (basis.log.kept.empty())
        throw EnrichmentDegeneracyError("all enriched columns are linearly dependent or zero");

    basis.gson.resize(nb, static_cast<int>(kept_cols.size()));
    for (size_t j = 0; j < kept_cols.size(); ++j) basis.gson.col(j) = kept_cols[j];
    return basis;
}

Eigen::MatrixXd enriched_beta_derivative(const EnrichedBasis& basis, const LmeField& shape_values,
                                         const EnrichmentField& field,
                                         const LmeEvaluator& evaluator,
                                         const LatticeModel& lattice, int wrt_repatom) {
    const int nb = static_cast<int>(basis.band.size());
    const int n_raw = static_cast<int>(basis.order.size());
    const int n_kept = basis.n_columns();

    std::unordered_map<int, int> col_of_rep;
    for (int j = 0; j < n_raw; ++j) col_of_rep[basis.order[j]] = j;

    // d(raw column)/d(beta_b): chain only through the LME factor, the shifted
    // Heaviside factor is beta-independent.
    Eigen::MatrixXd draw = Eigen::MatrixXd::Zero(nb, n_raw);
    for (int p = 0; p < nb; ++p) {
        const int a = basis.band[p];
        const LmeEvaluation& ev = shape_values.evals[a];
        auto pos = std::lower_bound(ev.support.begin(), ev.support.end(), wrt_repatom);
        if (pos == ev.support.end() || *pos != wrt_repatom) continue;
        const int wrt_pos = static_cast<int>(pos - ev.support.begin());
        const VecX dphi =
            evaluator.shape_beta_derivative(ev, lattice.atom_position0(a), wrt_pos);
        for (size_t s = 0; s < ev.support.size(); ++s) {
            auto it = col_of_rep.find(ev.support[s]);
            if (it == col_of_rep.end()) continue;
            const int j = it->second;
            draw(p, j) = dphi[s] * (field.chi[a] - basis.chi_rep[j]);
        }
    }

    // Forward chain through modified Gram-Schmidt, reusing stored projection
    // coefficients and norms.
    Eigen::MatrixXd dgson(nb, n_kept);
    std::vector<Eigen::VectorXd> cdots;
    cdots.reserve(n_kept);
    for (int k = 0; k < n_kept; ++k) {
        const int j = basis.log.kept[k];
        Eigen::VectorXd v = basis.raw.col(j);
        Eigen::VectorXd vdot = draw.col(j);
        for (int i = 0; i < k; ++i) {
            const double s = basis.log.proj[k][i];
            const double sdot = vdot.dot(basis.gson.col(i)) + v.dot(cdots[i]);
            vdot -= sdot * basis.gson.col(i) + s * cdots[i];
            v -= s * basis.gson.col(i);
        }
        const double n = basis.log.norms[k];
        const double ndot = v.dot(vdot) / n;
        Eigen::VectorXd cdot = vdot / n - basis.gson.col(k) * (ndot / n);
        dgson.col(k) = cdot;
        cdots.push_back(std::move(cdot));
    }
    return dgson;
}

Eigen::MatrixXd gram_schmidt_adjoint(const EnrichedBasis& basis, const Eigen::MatrixXd& cbar_in) {
    const int nb = static_cast<int>(basis.band.size());
    const int n_kept = basis.n_columns();
    Eigen::MatrixXd cbar = cbar_in; // accumulates cotangents on GSON columns
    Eigen::MatrixXd pbar = Eigen::MatrixXd::Zero(nb, n_kept);

    for (int k = n_kept - 1; k >= 0; --k) {
        const double n = basis.log.norms[k];
        const Eigen::VectorXd c = basis.gson.col(k);
        // Through the normalization: dc = (I - c c^T) dv / n.
        Eigen::VectorXd vbar = (cbar.col(k) - c * c.dot(cbar.col(k))) / n;
        // Walk the projections backwards, reconstructing the intermediate
        // vectors from the stored coefficients.
        Eigen::VectorXd v = n * c; // v^{(k-1)} in the recurrence
        for (int i = k - 1; i >= 0; --i) {
            const double s = basis.log.proj[k][i];
            const Eigen::VectorXd ci = basis.gson.col(i);
            const Eigen::VectorXd v_prev = v + s * ci;
            const double ci_dot_vbar = ci.dot(vbar);
            cbar.col(i) += -ci_dot_vbar * v_prev - s * vbar;
            vbar -= ci_dot_vbar * ci;
            v = v_prev;
        }
        pbar.col(k) = vbar;
    }
    return pbar;
}

void write_enrichment_field_csv(const EnrichmentField& field, const std::string& path,
                                const std::vector<std::string>& provenance) {
    CsvWriter w(path, "atom_id,psi,chi", provenance);
    for (int a = 0; a < field.psi.size(); ++a)
        w.row({std::to_string(a), format_double(field.psi[a]), format_double(field.chi[a])});
}

void write_enriched_basis_csv(const EnrichedBasis& basis, const std::string& path,
                              const std::vector<std::string>& provenance) {
    CsvWriter w(path, "atom_id,enriched_col,value", provenance);
    for (int j = 0; j < basis.n_columns(); ++j)
        for (int p = 0; p < static_cast<int>(basis.band.size()); ++p)
            if (basis.gson(p, j) != 0.0)
                w.row({std::to_string(basis.band[p]), std::to_string(j),
                       format_double(basis.gson(p, j))});
}

} // namespace xqc
