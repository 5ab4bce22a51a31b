#ifndef HML_PERTURBATION_HPP
#define HML_PERTURBATION_HPP

#include "hml/jets.hpp"
#include "hml/spectral.hpp"
#include "hml/toric.hpp"

#include <memory>

namespace hml {

// A scalar function of (x, theta) on the cylinder with exact Taylor jets in
// all 2n variables.
class ScalarField2n {
  public:
    virtual ~ScalarField2n() = default;
    virtual void add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const = 0;
    virtual bool theta_independent() const { return false; }

    double value(const Vec& x, const Vec& th) const {
        Jet j(JetSpace::get(static_cast<int>(x.size() + th.size()), 0));
        add_to_jet(j, x, th, 1.0);
        return j.value();
    }
};

using FieldPtr = std::shared_ptr<const ScalarField2n>;

// One perturbation mode: x-profile times cos(<k,theta> + phase).
// Profiles:
//   gauss : amp * prod_i exp(-((x_i - c_i)/w_i)^2 / 2)
//   smono : amp * exp((tau/2) sum_m p_m q_m(x))   (a monomial in the toric
//           sections s_m; its theta-frequency is forced to sum_m p_m m)
// The effective amplitude is amp * (tau/tau_ref)^tau_power, which is how the
// shipped tau-sweep families encode their scale.
struct ModeTerm {
    enum Profile { kGauss, kSMono } profile = kGauss;
    Eigen::VectorXi freq;   // theta frequency (gauss profile; derived for smono)
    double amp = 0.0;
    double phase = 0.0;
    double tau_ref = 0.0;   // 0 => no tau scaling
    double tau_power = 0.0;
    bool hat_scale = false; // amplitude measured against the rescaled metric
    Vec center, width;      // gauss
    std::vector<double> powers; // smono, one per fan ray

    double effective_amp(double tau) const {
        double a = amp;
        if (tau_ref > 0.0 && tau_power != 0.0) a *= std::pow(tau / tau_ref, tau_power);
        if (hat_scale) a /= tau * tau;
        return a;
    }
};

class ModeSum : public ScalarField2n {
  public:
    ModeSum(std::vector<ModeTerm> terms, WeightedFan fan, double tau)
        : terms_(std::move(terms)), fan_(std::move(fan)), tau_(tau) {}

    void add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const override;
    bool theta_independent() const override {
        for (const auto& t : terms_)
            if (effective_freq(t).cwiseAbs().sum() != 0) return false;
        return true;
    }

    const std::vector<ModeTerm>& terms() const { return terms_; }
    Eigen::VectorXi effective_freq(const ModeTerm& t) const;

    // (zero-frequency part, oscillatory part) with the same fan and tau
    std::pair<std::shared_ptr<ModeSum>, std::shared_ptr<ModeSum>> split_by_freq() const {
        std::vector<ModeTerm> zero, osc;
        for (const auto& t : terms_)
            (effective_freq(t).cwiseAbs().sum() == 0 ? zero : osc).push_back(t);
        return {std::make_shared<ModeSum>(zero, fan_, tau_),
                std::make_shared<ModeSum>(osc, fan_, tau_)};
    }

  private:
    std::vector<ModeTerm> terms_;
    WeightedFan fan_;
    double tau_;
};

// Synthetic near-Kahler-Einstein perturbation
//   f = b0 + b1 - sum_m log(1 + b_m / (tau q_m))^2
// with b0, b1 mode sums and b_m = const_m + mode sum per ray. Assembled with
// jet arithmetic so all derivatives are exact.
class SynthKEField : public ScalarField2n {
  public:
    SynthKEField(WeightedFan fan, double tau, FieldPtr b0, FieldPtr b1,
                 std::vector<double> bm_const, std::vector<FieldPtr> bm_fields)
        : fan_(std::move(fan)),
          tau_(tau),
          b0_(std::move(b0)),
          b1_(std::move(b1)),
          bm_const_(std::move(bm_const)),
          bm_fields_(std::move(bm_fields)) {}

    void add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const override;

  private:
    WeightedFan fan_;
    double tau_;
    FieldPtr b0_, b1_;
    std::vector<double> bm_const_;
    std::vector<FieldPtr> bm_fields_;
};

class SumField : public ScalarField2n {
  public:
    SumField(std::vector<FieldPtr> parts, std::vector<double> scales)
        : parts_(std::move(parts)), scales_(std::move(scales)) {}

    void add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const override {
        for (size_t i = 0; i < parts_.size(); ++i)
            parts_[i]->add_to_jet(out, x, th, scale * scales_[i]);
    }
    bool theta_independent() const override {
        for (const auto& p : parts_)
            if (!p->theta_independent()) return false;
        return true;
    }

  private:
    std::vector<FieldPtr> parts_;
    std::vector<double> scales_;
};

// Fiber average f0(x) of a field, by quadrature over a theta grid. Exact for
// trig polynomials below the grid Nyquist frequency.
class FiberAverageField : public ScalarField2n {
  public:
    FiberAverageField(FieldPtr src, int n, int quad_points)
        : src_(std::move(src)), n_(n), pts_(quad_points) {}

    void add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const override;
    bool theta_independent() const override { return true; }

  private:
    FieldPtr src_;
    int n_;
    int pts_;
};

struct PerturbationSplit {
    FieldPtr f0;   // fiber average, theta-independent
    FieldPtr f1;   // oscillatory part, zero fiber mean
    int quad_points = 0;
};

// Canonical decomposition f = f0 + f1. Mode sums split structurally by
// frequency; general fields (the synthetic family) split by quadrature.
PerturbationSplit fiber_decompose(const FieldPtr& f, int n, int quad_points);

} // namespace hml

#endif
