#ifndef HML_KAHLER_HPP
#define HML_KAHLER_HPP

#include "hml/perturbation.hpp"
#include "hml/toric.hpp"

namespace hml {

// Geometric conventions, fixed once and used by every module:
//   coordinates     x = log|z|^2, theta = arg z (period 2pi)
//   complex Hessian A_jk = phi_{x_j x_k} + phi_{theta_j theta_k}/4
//                   B_jk = (phi_{x_j theta_k} - phi_{x_k theta_j})/2
//   metric          G = [[A/2, B], [B^T, 2A]]   on (dx, dtheta)
//   J               J dx_j = (1/2) dtheta_j-dual, i.e.
//                   J(ax, at) = (-2 at, ax/2); Omega = J^T G = [[B^T/2, A], [-A, -2B]]
//   toric case      omega = sum_j dy_j ^ dtheta_j with y = grad(rho)
// The orientation (sign of J) is pinned by the flat-model oracle: the mean
// curvature form of a product torus in the flat model is +sum_j dtheta_j.
struct AmbientJets {
    int n = 0;
    Vec x, th;
    Mat A, B;                 // n x n
    Mat G, Ginv, Omega;       // 2n x 2n
    double gmin = 0.0;        // smallest eigenvalue of G
    std::vector<Mat> dG;      // dG[a](b,c) = d_a G_bc     (order >= 3)
    std::vector<Mat> Gamma;   // Gamma[a](b,c)             (order >= 3)
    Mat Ricci;                // 2n x 2n real Ricci        (order >= 4)
    bool has_gamma = false, has_ricci = false;
};

Mat complex_structure_matrix(int n); // the J above, acting on (ax, atheta)

struct FamilyParams {
    double tau = 1.0;
    double s = 0.0;
};

// The rescaled family potential  phi_hat = tau^2 (rho_tau + f0 + s f1).
// scale = tau^2 gives the hatted metric used by the solver; scale = 1 gives
// the unrescaled metric (Einstein-deviation reporting).
class AmbientMetric {
  public:
    AmbientMetric(const BasePotential* base, FieldPtr f0, FieldPtr f1, double s,
                  double scale)
        : base_(base), f0_(std::move(f0)), f1_(std::move(f1)), s_(s), scale_(scale) {}

    int dim() const { return base_->dim(); }
    double family_s() const { return s_; }
    double scale() const { return scale_; }
    const BasePotential& base() const { return *base_; }
    const FieldPtr& f0() const { return f0_; }
    const FieldPtr& f1() const { return f1_; }

    Jet potential_jet(const Vec& x, const Vec& th, int order) const;

    AmbientJets eval(const Vec& x, const Vec& th, bool need_gamma, bool need_ricci) const;

    bool theta_independent() const {
        return (!f0_ || f0_->theta_independent()) && (!f1_ || f1_->theta_independent() || s_ == 0.0);
    }

  private:
    const BasePotential* base_;
    FieldPtr f0_, f1_;
    double s_;
    double scale_;
};

// Hamiltonian-gradient flow data for the family omega_{tau,s}.
class FlowField {
  public:
    FlowField(const BasePotential* base, FieldPtr f0, FieldPtr f1)
        : base_(base), f0_(std::move(f0)), f1_(std::move(f1)), tau_(base->tau()) {}

    int dim() const { return base_->dim(); }
    double tau() const { return tau_; }
    bool trivial() const { return !f1_; }
    const BasePotential& base() const { return *base_; }
    const FieldPtr& f0() const { return f0_; }
    const FieldPtr& f1() const { return f1_; }

    AmbientMetric metric_at(double s) const { return AmbientMetric(base_, f0_, f1_, s, tau_ * tau_); }

    // V = -tau^2 grad_{g_hat(s)} f1 at (x, theta); the defining identity is
    // g_hat(V, W) = -tau^2 <d f1, W> for every W.
    Vec velocity(const Vec& x, const Vec& th, double s) const;

    // Jacobian d V / d(x,theta), for transporting frames
    Mat velocity_jacobian(const Vec& x, const Vec& th, double s) const;

  private:
    const BasePotential* base_;
    FieldPtr f0_, f1_;
    double tau_;
};

struct FlowOptions {
    double tol = 1e-12;
    double max_step = 0.25;
    double min_step = 1e-10;
    double region_c = 0.0;   // if > 0, abort with LeftRegion when outside Delta_{c tau}
    int max_steps = 100000;
};

struct FlowResult {
    Vec point;               // (x, theta) endpoint
    std::vector<Mat> frames; // transported frame columns, if requested
    int steps = 0;
    double s_reached = 0.0;
};

// Integrate dz/ds = V(z, s) from s0 to s1 with adaptive Dormand-Prince 5(4).
FlowResult flow_point(const FlowField& field, Vec point, double s0, double s1,
                      const FlowOptions& opt, const Mat* frame = nullptr);

// |phi_s^* omega_{tau,s} - omega_{tau,0}| sampled on the given frame pairs.
double pullback_defect(const FlowField& field, const Vec& point, double s,
                       const FlowOptions& opt);

// sup over probe points of max-abs entry of (Ric + lambda G), for the
// unrescaled metric (scale = 1); lambda = -1 is the adopted normalization.
double einstein_deviation(const AmbientMetric& metric, const std::vector<Vec>& xs,
                          const std::vector<Vec>& ths, double lambda = -1.0);

} // namespace hml

#endif
