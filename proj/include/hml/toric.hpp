#ifndef HML_TORIC_HPP
#define HML_TORIC_HPP

#include "hml/common.hpp"
#include "hml/errors.hpp"
#include "hml/jets.hpp"

#include <functional>
#include <optional>

namespace hml {

// Integer rays m in Z^n with weights w_m. The convex region
// Delta = { x : <m,x> + w_m <= 0 for all m } is the combinatorial seed of
// the toric model.
struct WeightedFan {
    int n = 0;
    std::vector<Eigen::VectorXi> rays;
    std::vector<double> weights;

    void validate() const;
    int ray_count() const { return static_cast<int>(rays.size()); }
};

struct Polytope {
    WeightedFan fan;
    double tau = 1.0;
    double c = 0.5;
    Vec interior_point;        // a strictly interior point of Delta (tau = 1 scale)
    Vec coordinate_lo, coordinate_hi; // bounding box of Delta (tau = 1 scale)
};

// q_m = w_m + <m,x>/tau
double q_value(const Eigen::VectorXi& ray, double weight, const Vec& x, double tau);

// all q-values of x at scale c*tau are <= 0
bool in_region(const WeightedFan& fan, const Vec& x, double c, double tau);

// negative margin = max_m q_m at scale c*tau (<= 0 inside)
double region_margin(const WeightedFan& fan, const Vec& x, double c, double tau);

// Certifies boundedness (recession cone trivial) and nonempty interior.
Polytope build_polytope(const WeightedFan& fan, double tau, double c = 0.5);

// Translate coordinates so that argmin rho = 0; returns the recentered fan
// and the applied shift (new weights w_m + <m, shift>).
struct RecenterResult {
    WeightedFan fan;
    Vec shift;
};
RecenterResult recenter(const WeightedFan& fan);

// theta-independent base of a Kahler potential. The jet layout convention:
// the first n variables of the target space are x, any further variables are
// theta (which the base does not touch). Works for spaces of dimension n
// (x only) and 2n (full phase space).
class BasePotential {
  public:
    virtual ~BasePotential() = default;
    virtual int dim() const = 0;
    virtual double tau() const { return 1.0; }
    virtual void add_to_jet(Jet& out, const Vec& x, double scale) const = 0;
    // region tests for the working region Delta_{c tau}; analytic models
    // default to a coordinate box
    virtual bool inside(const Vec& x, double c) const = 0;
    virtual double boundary_distance(const Vec& x, double c) const = 0;

    double value(const Vec& x) const;
    Vec grad_x(const Vec& x) const;
    Mat hess_x(const Vec& x) const;
    Jet jet_x(const Vec& x, int order) const;
};

// The toric potential rho_tau(x) = rho(x/tau),
// rho(x) = -sum_m log(<m,x> + w_m)^2, with exact derivative stacks to
// order 5 assembled from the closed form (no finite differences).
class ToricPotential : public BasePotential {
  public:
    ToricPotential(WeightedFan fan, double tau) : fan_(std::move(fan)), tau_(tau) {
        fan_.validate();
    }

    const WeightedFan& fan() const { return fan_; }
    int dim() const override { return fan_.n; }
    double tau() const override { return tau_; }

    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;
    Mat hessian(const Vec& x) const;

    // Add scale * rho_tau's Taylor coefficients into a jet; theta-dependence
    // is zero.
    void add_to_jet(Jet& out, const Vec& x, double scale) const override;

    bool inside(const Vec& x, double c) const override {
        return in_region(fan_, x, c, tau_);
    }
    double boundary_distance(const Vec& x, double c) const override {
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < fan_.ray_count(); ++i) {
            double q = q_value(fan_.rays[i], fan_.weights[i], x, c * tau_);
            d = std::min(d, -q * c * tau_ / fan_.rays[i].cast<double>().norm());
        }
        return d;
    }

    // guard used by evaluation: throws BoundaryEvaluation when any
    // q_m >= -1e-12
    void check_interior(const Vec& x) const;

  private:
    WeightedFan fan_;
    double tau_;
};

// Analytic base for reference models (the flat model sum_j exp(x_j), the
// constant-curvature 1-D model, ...). The jet function must add
// scale * rho's Taylor coefficients at x into the output jet.
class AnalyticPotential : public BasePotential {
  public:
    using JetFn = std::function<void(Jet&, const Vec&, double)>;
    AnalyticPotential(int n, JetFn fn, double box = 1e6)
        : n_(n), fn_(std::move(fn)), box_(box) {}

    int dim() const override { return n_; }
    void add_to_jet(Jet& out, const Vec& x, double scale) const override { fn_(out, x, scale); }
    bool inside(const Vec& x, double c) const override {
        return x.cwiseAbs().maxCoeff() <= c * box_;
    }
    double boundary_distance(const Vec& x, double c) const override {
        return c * box_ - x.cwiseAbs().maxCoeff();
    }

  private:
    int n_;
    JetFn fn_;
    double box_;
};

// rho = sum_j exp(x_j): the flat model
AnalyticPotential flat_model(int n, double box = 8.0);

} // namespace hml

#endif
