#include <doctest.h>

#include "helpers.hpp"

using namespace hml;
using namespace hml::test;

TEST_CASE("metric jets: flat model") {
    AnalyticPotential flat = flat_model(2);
    AmbientMetric amb(&flat, nullptr, nullptr, 0.0, 1.0);
    Vec x(2), th(2);
    x << 0.0, 0.4;
    th << 1.0, 2.0;
    AmbientJets j = amb.eval(x, th, true, true);
    CHECK(j.A(0, 0) == doctest::Approx(1.0));
    CHECK(j.A(1, 1) == doctest::Approx(std::exp(0.4)));
    CHECK(j.A(0, 1) == doctest::Approx(0.0));
    CHECK(j.B.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(j.G(2, 2) == doctest::Approx(2.0)); // 2A block
    CHECK(j.G(0, 0) == doctest::Approx(0.5)); // A/2 block
    CHECK(j.Ricci.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("metric jets: 1-D toric values and theta independence") {
    ToricPotential rho(fan_1d(), 1.0);
    AmbientMetric amb(&rho, nullptr, nullptr, 0.0, 1.0);
    AmbientJets j0 = amb.eval(Vec::Zero(1), Vec::Zero(1), true, true);
    CHECK(j0.G(1, 1) == doctest::Approx(8.0));   // 2 rho''(0)
    CHECK(j0.G(0, 0) == doctest::Approx(2.0));   // rho''(0)/2
    // Ric_thth = -4 u'' with u''(0) = 3
    CHECK(j0.Ricci(1, 1) == doctest::Approx(-12.0));
    CHECK(j0.Ricci(1, 1) < 0.0);

    double sup_var = 0.0;
    for (double th : {0.3, 1.1, 4.4}) {
        AmbientJets jt = amb.eval(Vec::Zero(1), Vec::Constant(1, th), true, true);
        sup_var = std::max(sup_var, (jt.G - j0.G).cwiseAbs().maxCoeff());
        sup_var = std::max(sup_var, (jt.Ricci - j0.Ricci).cwiseAbs().maxCoeff());
    }
    CHECK(sup_var < 1e-10);
}

TEST_CASE("metric degeneracy raises") {
    // a perturbation violent enough to break convexity
    WeightedFan fan = fan_1d();
    double tau = 5.0;
    ToricPotential rho(fan, tau);
    ModeTerm m = eps_mode(0.05, tau);
    m.amp = 100.0;    // violent amplitude against the rescaled metric
    m.center = Vec::Constant(1, 1.0);
    auto f = mode_field(fan, tau, {m});
    auto split = fiber_decompose(f, 1, 33);
    AmbientMetric amb(&rho, split.f0, split.f1, 1.0, tau * tau);
    CHECK_THROWS_AS(amb.eval(Vec::Constant(1, 1.0), Vec::Zero(1), false, false),
                    DegenerateMetric);
}

TEST_CASE("Ricci matches finite differences of log det g") {
    // theta-dependent perturbed metric, 1-D
    Model m = model_1d(10.0, 0.5, 0.3);
    AmbientMetric amb = m.metric(1.0);
    Vec x = Vec::Constant(1, 1.2), th = Vec::Constant(1, 0.7);
    AmbientJets j = amb.eval(x, th, false, true);

    // FD of Q = (1/2) log det [[A,-B],[B,A]] in x and theta
    auto Q = [&](double dx, double dth) {
        AmbientJets jj = amb.eval(Vec::Constant(1, 1.2 + dx), Vec::Constant(1, 0.7 + dth),
                                  false, false);
        Mat M(2, 2);
        M << jj.A(0, 0), -jj.B(0, 0), jj.B(0, 0), jj.A(0, 0);
        return 0.5 * std::log(M.determinant());
    };
    double h = 1e-4;
    double Qxx = (Q(h, 0) - 2.0 * Q(0, 0) + Q(-h, 0)) / (h * h);
    double Qtt = (Q(0, h) - 2.0 * Q(0, 0) + Q(0, -h)) / (h * h);
    double RA = -(Qxx + 0.25 * Qtt);
    CHECK(j.Ricci(1, 1) == doctest::Approx(2.0 * RA).epsilon(1e-5));
    CHECK(j.Ricci(0, 0) == doctest::Approx(0.5 * RA).epsilon(1e-5));
}

TEST_CASE("fiber decomposition examples") {
    WeightedFan fan = fan_1d();
    double tau = 10.0;
    auto harmonic = [&](int freq, double amp) {
        ModeTerm m;
        m.freq = Eigen::VectorXi::Constant(1, freq);
        m.amp = amp;
        m.center = Vec::Zero(1);
        m.width = Vec::Constant(1, 3.0);
        return m;
    };

    SUBCASE("f = cos theta -> (0, cos theta)") {
        auto f = mode_field(fan, tau, {harmonic(1, 1.0)});
        auto split = fiber_decompose(f, 1, 33);
        Vec x = Vec::Constant(1, 0.5), th = Vec::Constant(1, 0.9);
        CHECK(split.f0->value(x, th) == doctest::Approx(0.0));
        CHECK(split.f1->value(x, th) == doctest::Approx(f->value(x, th)));
    }
    SUBCASE("f = chi(x) -> (chi, 0)") {
        auto f = mode_field(fan, tau, {harmonic(0, 0.7)});
        auto split = fiber_decompose(f, 1, 33);
        Vec x = Vec::Constant(1, 0.5), th = Vec::Constant(1, 0.9);
        CHECK(split.f1->value(x, th) == doctest::Approx(0.0));
        CHECK(split.f0->value(x, th) == doctest::Approx(f->value(x, th)));
        CHECK(split.f0->theta_independent());
    }
    SUBCASE("f = chi (1 + cos theta) -> (chi, chi cos theta)") {
        auto f = mode_field(fan, tau, {harmonic(0, 0.7), harmonic(1, 0.7)});
        auto split = fiber_decompose(f, 1, 33);
        Vec x = Vec::Constant(1, 0.5);
        for (double t : {0.0, 0.9, 2.5}) {
            Vec th = Vec::Constant(1, t);
            double chi = split.f0->value(x, th);
            CHECK(split.f1->value(x, th) == doctest::Approx(chi * std::cos(t)).epsilon(1e-12));
        }
    }
    SUBCASE("quadrature split matches structural split for the synthetic family") {
        // force the quadrature path through a SynthKEField
        auto b0 = mode_field(fan, tau, {[&] {
                                 ModeTerm s;
                                 s.profile = ModeTerm::kSMono;
                                 s.powers = {1.0, 0.0};
                                 s.amp = 0.4;
                                 s.center = Vec::Zero(1);
                                 s.width = Vec::Ones(1);
                                 s.freq = Eigen::VectorXi::Zero(1);
                                 return s;
                             }()});
        auto ke = std::make_shared<SynthKEField>(fan, tau, b0, nullptr,
                                                 std::vector<double>{0.2, -0.1},
                                                 std::vector<FieldPtr>{nullptr, nullptr});
        auto split = fiber_decompose(std::static_pointer_cast<const ScalarField2n>(ke), 1, 33);
        Rng rng(3);
        double worst_recon = 0.0;
        for (int t = 0; t < 20; ++t) {
            Vec x = Vec::Constant(1, rng.uniform(-4.0, 4.0));
            Vec th = Vec::Constant(1, rng.uniform(0.0, kTwoPi));
            double v = ke->value(x, th);
            worst_recon = std::max(worst_recon, std::abs(split.f0->value(x, th) +
                                                         split.f1->value(x, th) - v));
        }
        CHECK(worst_recon < 1e-12);
        // fiber mean of f1 vanishes to quadrature accuracy
        TorusGrid g(1, 16);
        double mean = 0.0;
        for (int p = 0; p < g.size(); ++p)
            mean += split.f1->value(Vec::Constant(1, 1.0), g.theta_of(p)) / g.size();
        CHECK(std::abs(mean) < 1e-12);
    }
}

TEST_CASE("hamiltonian gradient field") {
    SUBCASE("f1 = 0 gives V = 0") {
        Model m = model_1d(10.0);
        FlowField flow = m.flow();
        CHECK(flow.trivial());
        CHECK(flow.velocity(Vec::Constant(1, 1.0), Vec::Zero(1), 0.5).norm() == 0.0);
    }
    SUBCASE("flat model closed form") {
        // f1 = eps cos(theta), s = 0: V has only a theta component equal to
        // -(tau^2/2) * (-eps sin theta) * g^{thth}
        AnalyticPotential flat = flat_model(1);
        WeightedFan fan = fan_1d();
        ModeTerm m;
        m.freq = Eigen::VectorXi::Constant(1, 1);
        m.amp = 1e-3;
        m.center = Vec::Zero(1);
        m.width = Vec::Constant(1, 1e5); // effectively x-independent near 0
        auto f1 = mode_field(fan, 1.0, {m});
        FlowField flow(&flat, nullptr, f1);
        Vec x = Vec::Zero(1), th = Vec::Constant(1, 0.8);
        Vec V = flow.velocity(x, th, 0.0);
        double gthth_inv = 1.0 / 2.0; // 2A = 2 e^0
        double expect = -0.5 * 1.0 * (-1e-3 * std::sin(0.8)) * gthth_inv;
        CHECK(V[1] == doctest::Approx(expect).epsilon(1e-9));
        CHECK(std::abs(V[0]) < 1e-12);
    }
    SUBCASE("defining identity at 20 random directions") {
        Model m = model_1d(20.0, 0.5, 0.05);
        FlowField flow = m.flow();
        Vec x = Vec::Constant(1, 1.7), th = Vec::Constant(1, 0.6);
        double s = 0.37;
        Vec V = flow.velocity(x, th, s);
        AmbientJets J = m.metric(s).eval(x, th, false, false);
        Jet f1j(JetSpace::get(2, 1));
        m.f1->add_to_jet(f1j, x, th, 1.0);
        Rng rng(5);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Vec W = rng.uniform_vec(2, -1.0, 1.0);
            double lhs = V.dot(J.G * W);
            double rhs = -0.5 * sqr(m.tau) *
                         (f1j.deriv({1, 0}) * W[0] + f1j.deriv({0, 1}) * W[1]);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("flow map") {
    FlowOptions opt;
    opt.tol = 1e-12;

    SUBCASE("trivial family is the identity") {
        Model m = model_1d(10.0);
        FlowField flow = m.flow();
        Vec z(2);
        z << 0.7, 1.9;
        FlowResult r = flow_point(flow, z, 0.0, 1.0, opt);
        CHECK((r.point - z).norm() == 0.0);
    }
    Model m = model_1d(20.0, 0.5, 0.05);
    FlowField flow = m.flow();
    SUBCASE("time reversal") {
        Vec z(2);
        z << 1.3, 0.8;
        FlowResult fwd = flow_point(flow, z, 0.0, 1.0, opt);
        FlowResult back = flow_point(flow, fwd.point, 1.0, 0.0, opt);
        CHECK((back.point - z).norm() < 10.0 * opt.tol * 1e2);
    }
    SUBCASE("pullback defect on a 17-point loop") {
        double defect = 0.0;
        for (int k = 0; k < 17; ++k) {
            Vec p(2);
            p << 2.0 * std::sin(k * 0.37), kTwoPi * k / 17.0;
            defect = std::max(defect, pullback_defect(flow, p, 1.0, opt));
        }
        CHECK(defect < 10.0 * opt.tol * 1e2);
    }
    SUBCASE("region guard raises LeftRegion") {
        FlowOptions guard = opt;
        guard.region_c = 0.5;
        Vec z(2);
        z << 0.99 * 0.5 * 20.0, 0.3; // just inside Delta_{c tau}
        // a strong outward perturbation is needed to leave; instead shrink
        // the region so the start point is already near the edge and verify
        // the guard at c' smaller than the start position
        guard.region_c = 0.2;
        CHECK_THROWS_AS(flow_point(flow, z, 0.0, 1.0, guard), LeftRegion);
    }
}

TEST_CASE("synthetic near-KE family") {
    WeightedFan fan = fan_1d();
    SUBCASE("all b zero gives f = 0") {
        auto ke = std::make_shared<SynthKEField>(fan, 20.0, nullptr, nullptr,
                                                 std::vector<double>{0.0, 0.0},
                                                 std::vector<FieldPtr>{nullptr, nullptr});
        CHECK(ke->value(Vec::Constant(1, 2.0), Vec::Constant(1, 1.0)) == doctest::Approx(0.0));
    }
    SUBCASE("constant b_m closed form") {
        double beta = 0.3, tau = 20.0;
        auto ke = std::make_shared<SynthKEField>(fan, tau, nullptr, nullptr,
                                                 std::vector<double>{beta, beta},
                                                 std::vector<FieldPtr>{nullptr, nullptr});
        Vec x = Vec::Constant(1, 2.0);
        double q1 = -1.0 + 2.0 / tau, q2 = -1.0 - 2.0 / tau;
        double expect = -std::log(sqr(1.0 + beta / (tau * q1))) -
                        std::log(sqr(1.0 + beta / (tau * q2)));
        CHECK(ke->value(x, Vec::Zero(1)) == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("oscillatory decay in tau: sup |f1| ratios at least 2") {
        auto make_f1_sup = [&](double tau) {
            ModeTerm s;
            s.profile = ModeTerm::kSMono;
            s.powers = {1.0, 0.0};
            s.amp = 0.5;
            s.phase = 0.3;
            s.center = Vec::Zero(1);
            s.width = Vec::Ones(1);
            s.freq = Eigen::VectorXi::Zero(1);
            auto b0 = mode_field(fan, tau, {s});
            auto ke = std::make_shared<SynthKEField>(fan, tau, b0, nullptr,
                                                     std::vector<double>{0.2, -0.1},
                                                     std::vector<FieldPtr>{nullptr, nullptr});
            auto split = fiber_decompose(std::static_pointer_cast<const ScalarField2n>(ke), 1, 33);
            return sup_over_region(*split.f1, fan, 0.5, tau);
        };
        double s20 = make_f1_sup(20.0), s40 = make_f1_sup(40.0), s80 = make_f1_sup(80.0);
        CHECK(s20 > s40);
        CHECK(s40 > s80);
        CHECK(s20 / s40 >= 2.0);
        CHECK(s40 / s80 >= 2.0);
    }
    SUBCASE("amplitude guard") {
        // b_m large enough to cross 1 + b/(tau q) <= 0 near the boundary
        double tau = 20.0;
        auto ke = std::make_shared<SynthKEField>(fan, tau, nullptr, nullptr,
                                                 std::vector<double>{25.0, 0.0},
                                                 std::vector<FieldPtr>{nullptr, nullptr});
        CHECK_THROWS_AS(ke->value(Vec::Constant(1, 0.0), Vec::Zero(1)), AmplitudeTooLarge);
    }
}

TEST_CASE("einstein deviation decreases along the tau sweep") {
    WeightedFan fan = fan_1d();
    auto deviation = [&](double tau) {
        ToricPotential rho(fan, tau);
        ModeTerm s;
        s.profile = ModeTerm::kSMono;
        s.powers = {1.0, 0.0};
        s.amp = 0.3;
        s.center = Vec::Zero(1);
        s.width = Vec::Ones(1);
        s.freq = Eigen::VectorXi::Zero(1);
        auto b0 = mode_field(fan, tau, {s});
        auto ke = std::make_shared<SynthKEField>(fan, tau, b0, nullptr,
                                                 std::vector<double>{0.2, -0.1},
                                                 std::vector<FieldPtr>{nullptr, nullptr});
        auto split = fiber_decompose(std::static_pointer_cast<const ScalarField2n>(ke), 1, 33);
        // unrescaled metric, lambda = -1
        AmbientMetric amb(&rho, split.f0, split.f1, 1.0, 1.0);
        std::vector<Vec> xs, ths;
        for (double t : {-0.4, -0.1, 0.2, 0.45})
            xs.push_back(Vec::Constant(1, t * tau));
        for (double t : {0.0, 1.0, 2.5}) ths.push_back(Vec::Constant(1, t));
        return einstein_deviation(amb, xs, ths, -1.0);
    };
    double d20 = deviation(20.0), d40 = deviation(40.0), d80 = deviation(80.0);
    CHECK(d20 > d40);
    CHECK(d40 > d80);
}
