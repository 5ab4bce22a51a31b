#ifndef HML_LAGRANGIAN_HPP
#define HML_LAGRANGIAN_HPP

#include "hml/kahler.hpp"
#include "hml/spectral.hpp"

#include <memory>

namespace hml {

// Action-angle chart at a base point: y(x) = grad(rho0_hat)(x) - grad(rho0_hat)(x*),
// where rho0_hat = tau^2 (rho_tau + f0) is the toric part of the rescaled
// potential. In (theta, y) the toric symplectic form is sum_j dy_j ^ dtheta_j
// exactly (verified numerically at creation).
class FiberChart {
  public:
    FiberChart(const BasePotential* base, FieldPtr f0, double scale, Vec xstar,
               double region_c);

    int dim() const { return static_cast<int>(xstar_.size()); }
    const Vec& xstar() const { return xstar_; }
    const Vec& ystar() const { return ystar_; }
    const Mat& hess_star() const { return A_star_; }
    double chart_radius_x() const { return radius_x_; }
    double chart_radius_y() const { return radius_y_; }
    double darboux_defect() const { return darboux_defect_; }
    double scale() const { return scale_; }
    const BasePotential& base() const { return *base_; }
    const FieldPtr& f0() const { return f0_; }

    // toric-part potential rho0_hat jets in x only
    double rho0_value(const Vec& x) const;
    Vec rho0_grad(const Vec& x) const;
    Mat rho0_hess(const Vec& x) const;

    Vec y_of_x(const Vec& x) const { return rho0_grad(x) - ystar_; }
    // convex Newton inversion of y -> x; throws OutOfChart
    Vec x_of_y(const Vec& y) const;

  private:
    const BasePotential* base_;
    FieldPtr f0_;
    double scale_;
    Vec xstar_, ystar_;
    Mat A_star_;
    double radius_x_ = 0.0, radius_y_ = 0.0;
    double darboux_defect_ = 0.0;
};

// Candidate Lagrangian torus L(h): the graph y = dh(theta) over a chart.
// h is mean-zero and band-limited by the grid.
struct GraphTorus {
    const FiberChart* chart = nullptr;
    std::shared_ptr<const TorusGrid> grid;
    Vec h; // grid values, mean zero

    void enforce_mean_zero() { h.array() -= h.mean(); }
};

// Parametrized torus theta -> (x(theta), theta + disp(theta)).
struct EmbeddingFields {
    std::shared_ptr<const TorusGrid> grid;
    std::vector<Vec> x;     // n fields
    std::vector<Vec> disp;  // n periodic displacement fields
    double newton_residual = 0.0;
};

// per-grid-point geometry of an embedded Lagrangian torus
struct GeometrySample {
    std::shared_ptr<const TorusGrid> grid;
    int n = 0;
    EmbeddingFields emb;

    std::vector<Mat> gL, gLinv;         // induced metric, inverse (n x n)
    Vec W;                              // volume density sqrt(det gL)
    std::vector<std::vector<Mat>> a;    // a[p][i](j,k) second fundamental form
    std::vector<Vec> alpha;             // mean curvature one-form components
    std::vector<Vec> alpha_H;           // same, rebuilt through iota(H) omega
    std::vector<Mat> E;                 // tangent frames (2n x n)
    std::vector<Mat> Gamb, Gambinv, Omega, Ricci; // ambient tensors at points
    bool has_ricci = false;

    double volume = 0.0;
    double lagrangian_defect = 0.0;     // max |omega(E_i, E_j)|
    double symmetry_defect = 0.0;       // max asymmetry of a_{ijk}
    double alpha_route_defect = 0.0;    // max |alpha - alpha_H|

    double sup_alpha_norm() const;      // sup_theta |alpha|_{gL}
    double sup_variation(const Vec& field) const {
        return field.maxCoeff() - field.minCoeff();
    }
};

// ---- construction ----

EmbeddingFields embed_graph(const GraphTorus& L);
EmbeddingFields flow_embedding(const FlowField& flow, const EmbeddingFields& emb, double s,
                               const FlowOptions& opt);
GeometrySample build_sample(const AmbientMetric& amb, const EmbeddingFields& emb,
                            bool need_ricci);

// ---- calculus on a sample (all spectral in theta, metric-weighted) ----

using OneForm = std::vector<Vec>; // n component fields on the grid

Vec codifferential(const GeometrySample& s, const OneForm& beta);
OneForm differential(const GeometrySample& s, const Vec& f);
Vec scalar_product_field(const GeometrySample& s, const OneForm& u, const OneForm& v);
double l2_inner(const GeometrySample& s, const Vec& u, const Vec& v);
double l2_inner(const GeometrySample& s, const OneForm& u, const OneForm& v);
double sup_norm(const GeometrySample& s, const OneForm& u); // pointwise gL-norm sup
// components (d beta)_{ij} = d_i beta_j - d_j beta_i for i < j
std::vector<Vec> exterior_derivative(const GeometrySample& s, const OneForm& beta);
double dalpha_norm(const GeometrySample& s); // L2 norm of d(alpha)

// Poisson solve d*d(phi) = rhs on mean-zero functions.
Vec poisson_solve(const GeometrySample& s, const Vec& rhs, double tol = 1e-12,
                  int maxit = 4000);

// harmonic representatives of [dtheta_j]
std::vector<OneForm> harmonic_basis(const GeometrySample& s);

enum class LagClass { Minimal, LMinimal, HMinimal, None };
const char* to_string(LagClass c);

struct HodgeSplit {
    Vec klass;                // harmonic class coordinates in the [dtheta_j] basis
    OneForm harmonic, exact, coexact;
    Vec exact_potential;
    double reconstruction_error = 0.0;
    double orthogonality_error = 0.0;
    LagClass classification = LagClass::None;
};

struct HodgeOptions {
    double tol_minimal = 1e-6;
    double tol_h = 1e-8;
    double solve_tol = 1e-12;
};

HodgeSplit hodge_decompose(const GeometrySample& s, const OneForm& alpha,
                           const HodgeOptions& opt = {});

// ---- variation formulas ----

// -integral over L of gL(alpha, beta) dV
double first_variation(const GeometrySample& s, const OneForm& beta);

// alpha_dot = d d* beta - iota(V_beta) Ric, V_beta raised by the induced
// metric. Pass ricci_override = {lambda} to use Ric = lambda * G synthetically.
OneForm alpha_dot(const GeometrySample& s, const OneForm& beta,
                  std::optional<double> ricci_lambda = std::nullopt);

// D_alpha beta = d* d d* beta - d*(iota(V_beta) Ric) - V_alpha(g(alpha,beta))
//                + 2 (a^{ijk} alpha_j beta_k)_{;i}
Vec d_operator(const GeometrySample& s, const OneForm& beta,
               std::optional<double> ricci_lambda = std::nullopt);

// pullback to L of iota(V) Omega_ambient for an ambient coordinate direction
OneForm pullback_iota_omega(const GeometrySample& s, int ambient_axis);

} // namespace hml

#endif
