#include "hml/oracles.hpp"

#include <complex>

namespace hml {

OneForm flat_graph_alpha_oracle(const GeometrySample& smp) {
    const TorusGrid& g = *smp.grid;
    const int n = smp.n;
    // dz_j/dtheta_k = z_j (dx_j/dtheta_k / 2 + i d(theta_j + disp_j)/dtheta_k);
    // arg det = sum_j (theta_j + disp_j) + arg det M with
    // M_jk = x_{j,k}/2 + i (delta_jk + disp_{j,k})
    std::vector<std::vector<Vec>> dx(n, std::vector<Vec>(n)), dd(n, std::vector<Vec>(n));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            dx[j][k] = g.deriv(smp.emb.x[j], k);
            dd[j][k] = g.deriv(smp.emb.disp[j], k);
        }
    Vec argdet(g.size());
    Eigen::MatrixXcd M(n, n);
    for (int p = 0; p < g.size(); ++p) {
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                M(j, k) = std::complex<double>(0.5 * dx[j][k][p],
                                               (j == k ? 1.0 : 0.0) + dd[j][k][p]);
        std::complex<double> det = M.determinant();
        argdet[p] = std::atan2(det.imag(), det.real());
    }
    // theta-angle branch: for small perturbations arg det stays near its
    // fiber value i^n, no unwrapping needed
    OneForm out(n, Vec(g.size()));
    for (int i = 0; i < n; ++i) {
        out[i] = g.deriv(argdet, i);
        for (int j = 0; j < n; ++j) out[i] += dd[j][i];
        out[i].array() += 1.0; // the d(theta_i) term of d(sum_j theta_j)
    }
    return out;
}

std::vector<Vec> deformation_field(const GeometrySample& smp, const OneForm& beta,
                                   bool volume_convention) {
    const int n = smp.n;
    const Mat J = complex_structure_matrix(n);
    const double sign = volume_convention ? 1.0 : -1.0;
    std::vector<Vec> out(smp.grid->size());
    Vec b(n);
    for (int p = 0; p < smp.grid->size(); ++p) {
        for (int i = 0; i < n; ++i) b[i] = beta[i][p];
        Vec coef = smp.gLinv[p] * b;
        Vec tangent = smp.E[p] * coef;
        out[p] = sign * (J * tangent);
    }
    return out;
}

EmbeddingFields deform_embedding(const EmbeddingFields& emb, const std::vector<Vec>& V,
                                 double t) {
    EmbeddingFields out = emb;
    const int n = static_cast<int>(emb.x.size());
    for (int p = 0; p < emb.grid->size(); ++p)
        for (int i = 0; i < n; ++i) {
            out.x[i][p] += t * V[p][i];
            out.disp[i][p] += t * V[p][n + i];
        }
    return out;
}

FdDeformResult fd_deform(const AmbientMetric& amb, const GeometrySample& base,
                         FdQuantity quantity, const OneForm& beta,
                         const std::vector<double>& steps) {
    FdDeformResult out;
    const bool volume = quantity == FdQuantity::Volume;
    std::vector<Vec> V = deformation_field(base, beta, volume);

    // formula prediction on the base sample
    Vec predicted_field;
    OneForm predicted_form;
    double predicted_scalar = 0.0;
    switch (quantity) {
        case FdQuantity::Volume: predicted_scalar = first_variation(base, beta); break;
        case FdQuantity::Alpha: predicted_form = alpha_dot(base, beta); break;
        case FdQuantity::DStarAlpha: predicted_field = d_operator(base, beta); break;
    }

    double first_fd = 0.0, first_err = 0.0;
    for (double t : steps) {
        if (!(t > 0.0)) throw StepTooSmall("nonpositive finite-difference step");
        GeometrySample plus = build_sample(amb, deform_embedding(base.emb, V, t), !volume);
        GeometrySample minus = build_sample(amb, deform_embedding(base.emb, V, -t), !volume);
        double err = 0.0;
        if (quantity == FdQuantity::Volume) {
            double fd = (plus.volume - minus.volume) / (2.0 * t);
            err = std::abs(fd - predicted_scalar);
            if (out.errors.empty()) first_fd = fd;
        } else if (quantity == FdQuantity::Alpha) {
            double worst = 0.0;
            for (int i = 0; i < base.n; ++i) {
                Vec fd = (plus.alpha[i] - minus.alpha[i]) / (2.0 * t);
                worst = std::max(worst, (fd - predicted_form[i]).cwiseAbs().maxCoeff());
            }
            err = worst;
        } else {
            Vec rp = codifferential(plus, plus.alpha);
            Vec rm = codifferential(minus, minus.alpha);
            Vec fd = (rp - rm) / (2.0 * t);
            err = (fd - predicted_field).cwiseAbs().maxCoeff();
        }
        out.errors.push_back(err);
        out.steps.push_back(t);
        if (out.errors.size() == 1) first_err = err;
    }

    OracleReport rep;
    rep.quantity = volume ? "d/dt Vol" : (quantity == FdQuantity::Alpha ? "alpha_dot" : "D_alpha");
    rep.oracle_value = first_fd;
    rep.library_value = predicted_scalar;
    rep.error = first_err;
    if (out.errors.size() >= 2 && out.errors[1] > 0.0) {
        rep.order_estimate = std::log2(out.errors[0] / out.errors[1]) /
                             std::log2(out.steps[0] / out.steps[1]);
        rep.has_order = true;
    }
    out.report = rep;
    return out;
}

} // namespace hml
