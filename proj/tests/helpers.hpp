#ifndef HML_TEST_HELPERS_HPP
#define HML_TEST_HELPERS_HPP

#include "hml/cli.hpp"

namespace hml::test {

inline WeightedFan fan_1d(double w_plus = -1.0, double w_minus = -1.0) {
    WeightedFan fan;
    fan.n = 1;
    fan.rays = {Eigen::VectorXi::Constant(1, 1), Eigen::VectorXi::Constant(1, -1)};
    fan.weights = {w_plus, w_minus};
    return fan;
}

inline WeightedFan fan_square() {
    WeightedFan fan;
    fan.n = 2;
    Eigen::VectorXi e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    fan.rays = {e1, -e1, e2, -e2};
    fan.weights = {-1.0, -1.0, -1.0, -1.0};
    return fan;
}

// the shipped eps-family: gauss bump at center_frac*tau, width 0.25 tau,
// cos(theta) mode, amplitude eps against the rescaled metric, ~1/tau scale
inline ModeTerm eps_mode(double eps, double tau, double center_frac = 0.2,
                         double tau_ref = 20.0) {
    ModeTerm m;
    m.freq = Eigen::VectorXi::Constant(1, 1);
    m.amp = eps;
    m.hat_scale = true;
    m.tau_ref = tau_ref;
    m.tau_power = 0.0;  // uniformly bounded in the rescaled metric
    m.center = Vec::Constant(1, center_frac * tau);
    m.width = Vec::Constant(1, 0.25 * tau);
    return m;
}

inline FieldPtr mode_field(const WeightedFan& fan, double tau, std::vector<ModeTerm> ms) {
    return std::make_shared<ModeSum>(std::move(ms), fan, tau);
}

struct Model {
    std::shared_ptr<ToricPotential> rho;
    FieldPtr f0, f1;
    double tau, c;

    FlowField flow() const { return FlowField(rho.get(), f0, f1); }
    AmbientMetric metric(double s) const {
        return AmbientMetric(rho.get(), f0, f1, s, tau * tau);
    }
};

inline Model model_1d(double tau, double c = 0.5, double eps = 0.0, double center_frac = 0.2) {
    Model m;
    m.tau = tau;
    m.c = c;
    m.rho = std::make_shared<ToricPotential>(fan_1d(), tau);
    if (eps != 0.0) {
        auto f = mode_field(fan_1d(), tau, {eps_mode(eps, tau, center_frac)});
        auto split = fiber_decompose(f, 1, 33);
        m.f0 = split.f0;
        m.f1 = split.f1;
        auto empty = [](const FieldPtr& p) {
            auto ms = std::dynamic_pointer_cast<const ModeSum>(p);
            return ms && ms->terms().empty();
        };
        if (empty(m.f0)) m.f0 = nullptr;
        if (empty(m.f1)) m.f1 = nullptr;
    }
    return m;
}

inline GeometrySample fiber_sample(const BasePotential& base, const FieldPtr& f0,
                                   const FieldPtr& f1, double s, double scale, const Vec& xstar,
                                   int N, double region_c, bool ricci = true) {
    FiberChart chart(&base, f0, scale, xstar, region_c);
    auto grid = std::make_shared<TorusGrid>(base.dim(), N);
    GraphTorus L{&chart, grid, Vec::Zero(grid->size())};
    EmbeddingFields emb = embed_graph(L);
    AmbientMetric amb(&base, f0, f1, s, scale);
    return build_sample(amb, emb, ricci);
}

inline Vec grid_function(const TorusGrid& g, const std::function<double(const Vec&)>& f) {
    Vec v(g.size());
    for (int p = 0; p < g.size(); ++p) v[p] = f(g.theta_of(p));
    return v;
}

// sup over an x-sample of Delta_{c tau} and the theta grid of |field|
inline double sup_over_region(const ScalarField2n& f, const WeightedFan& fan, double c,
                              double tau, int xsamples = 41, int tsamples = 33) {
    double worst = 0.0;
    for (int i = 0; i < xsamples; ++i) {
        double t = xsamples == 1 ? 0.0 : -1.0 + 2.0 * i / (xsamples - 1.0);
        Vec x = Vec::Constant(1, t * c * tau * 0.999);
        if (!in_region(fan, x, c, tau)) continue;
        for (int j = 0; j < tsamples; ++j) {
            Vec th = Vec::Constant(1, kTwoPi * j / tsamples);
            worst = std::max(worst, std::abs(f.value(x, th)));
        }
    }
    return worst;
}

} // namespace hml::test

#endif
