#ifndef HML_ORACLES_HPP
#define HML_ORACLES_HPP

#include "hml/lagrangian.hpp"
#include "hml/symbolic1d.hpp"

namespace hml {

struct OracleReport {
    std::string quantity;
    double oracle_value = 0.0;
    double library_value = 0.0;
    double error = 0.0;
    double order_estimate = 0.0; // Richardson order, when applicable
    bool has_order = false;
    bool pass = false;
    double tolerance = 0.0;
};

// Closed-form geometry of the product torus |z_j| = r_j in the flat model
// rho = sum exp(x_j). In the module conventions the fiber metric is
// diag(2 r_j^2), alpha = +sum dtheta_j, and Vol = (2 pi)^n 2^{n/2} prod r_j.
struct FlatTorusOracle {
    Vec r;
    Mat metric() const {
        Mat g = Mat::Zero(r.size(), r.size());
        for (int i = 0; i < r.size(); ++i) g(i, i) = 2.0 * r[i] * r[i];
        return g;
    }
    Vec alpha() const { return Vec::Ones(r.size()); } // components of +sum dtheta
    double volume() const {
        double v = std::pow(kTwoPi, static_cast<double>(r.size())) *
                   std::pow(2.0, 0.5 * r.size());
        for (int i = 0; i < r.size(); ++i) v *= r[i];
        return v;
    }
    // a_{iii} = 2 r_i^2, other components zero
    double a_diag(int i) const { return 2.0 * r[i] * r[i]; }
};

// Mean curvature form of ANY embedded Lagrangian torus in the flat model via
// the Lagrangian angle: alpha = + d arg det[dz_j / dtheta_k]. Independent of
// the second-fundamental-form machinery.
OneForm flat_graph_alpha_oracle(const GeometrySample& smp);

// Deformation fields used by the finite-difference oracles. For a one-form
// beta on L the volume oracle deforms along +J(beta^sharp) while the
// derivative oracles (alpha_dot, D) deform along -J(beta^sharp); the relative
// sign is the coframe chirality of the normal-coordinate frame convention.
std::vector<Vec> deformation_field(const GeometrySample& smp, const OneForm& beta,
                                   bool volume_convention);

EmbeddingFields deform_embedding(const EmbeddingFields& emb, const std::vector<Vec>& V,
                                 double t);

enum class FdQuantity { Volume, Alpha, DStarAlpha };

struct FdDeformResult {
    OracleReport report;
    std::vector<double> errors; // per step
    std::vector<double> steps;
};

// Centered differences of the quantity along the deformation generated by
// beta, compared against first_variation / alpha_dot / d_operator; includes
// a Richardson order estimate over the step schedule.
FdDeformResult fd_deform(const AmbientMetric& amb, const GeometrySample& base,
                         FdQuantity quantity, const OneForm& beta,
                         const std::vector<double>& steps);

} // namespace hml

#endif
