#include <doctest.h>

#include "helpers.hpp"

using namespace hml;
using namespace hml::test;

TEST_CASE("log volume profile") {
    SUBCASE("u'(0) = 0 and u''(0) = 3 on the symmetric model (tau = 1)") {
        ToricPotential rho(fan_1d(), 1.0);
        VolumeProfile u(&rho, nullptr, 1.0);
        CHECK(u.gradient(Vec::Zero(1)).norm() < 1e-14);
        CHECK(u.hessian(Vec::Zero(1))(0, 0) == doctest::Approx(3.0).epsilon(1e-10));
        // symbolic oracle: u = (1/2) log rho'' + const, rho'' = 4(1+x^2)/(1-x^2)^2
        Symbolic1D upp(sym::scale(
            0.5, sym::sub(sym::log(sym::add(sym::constant(1.0),
                                            sym::pow(sym::var(), 2))),
                          sym::scale(2.0, sym::log(sym::sub(sym::constant(1.0),
                                                            sym::pow(sym::var(), 2)))))));
        CHECK(u.hessian(Vec::Constant(1, 0.3))(0, 0) ==
              doctest::Approx(upp.deriv(2, 0.3)).epsilon(1e-10));
    }
    SUBCASE("two evaluation routes agree") {
        double tau = 15.0;
        Model m = model_1d(tau, 0.5, 0.1);
        VolumeProfile u(m.rho.get(), m.f0, tau * tau);
        for (double xq : {-3.0, 0.0, 4.0}) {
            double a = u.value(Vec::Constant(1, xq));
            double b = u.value_by_quadrature(Vec::Constant(1, xq), 16);
            CHECK(std::abs(a - b) < 1e-8 * std::max(1.0, std::abs(a)));
        }
    }
    SUBCASE("flat model: u affine, Hess u = 0, NoMinimum") {
        AnalyticPotential flat = flat_model(1);
        VolumeProfile u(&flat, nullptr, 1.0);
        CHECK(u.hessian(Vec::Constant(1, 0.3)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(u.gradient(Vec::Constant(1, 0.3))[0] == doctest::Approx(0.5));
        CHECK_THROWS_AS(minimize_volume(u, 0.5), NoMinimum);
    }
}

TEST_CASE("minimize_volume") {
    SUBCASE("symmetric model: x0 = 0") {
        ToricPotential rho(fan_1d(), 10.0);
        VolumeProfile u(&rho, nullptr, 100.0);
        MinimizeResult mz = minimize_volume(u, 0.5);
        CHECK(mz.x0.norm() < 1e-10);
        CHECK(mz.boundary_gap > 0.0);
    }
    SUBCASE("recentered asymmetric fan: x0 = 0 after recentering") {
        RecenterResult rc = recenter(fan_1d(-3.0, 1.0));
        ToricPotential rho(rc.fan, 10.0);
        VolumeProfile u(&rho, nullptr, 100.0);
        MinimizeResult mz = minimize_volume(u, 0.5);
        CHECK(mz.x0.norm() < 1e-9);
    }
    SUBCASE("convexity where Ricci is negative: 50 samples") {
        double tau = 10.0;
        ToricPotential rho(fan_1d(), tau);
        VolumeProfile u(&rho, nullptr, tau * tau);
        AmbientMetric amb(&rho, nullptr, nullptr, 0.0, tau * tau);
        Rng rng(17);
        int checked = 0;
        for (int t = 0; t < 50; ++t) {
            Vec x = Vec::Constant(1, rng.uniform(-0.49, 0.49) * tau);
            AmbientJets j = amb.eval(x, Vec::Zero(1), false, true);
            Eigen::SelfAdjointEigenSolver<Mat> er(j.Ricci);
            REQUIRE(er.eigenvalues().maxCoeff() < 0.0); // Ricci negative here
            Eigen::SelfAdjointEigenSolver<Mat> eh(u.hessian(x));
            CHECK(eh.eigenvalues().minCoeff() > 0.0);
            ++checked;
        }
        CHECK(checked == 50);
    }
}

TEST_CASE("psi and resolution stability") {
    double tau = 20.0;
    Model m = model_1d(tau, 0.5, 0.05);
    SUBCASE("toric metric: Psi(x) equals the derivative of log det Hess") {
        SolverConfig cfg;
        PipelineContext ctx(m.rho.get(), nullptr, nullptr, 0.5, 16, cfg);
        Vec xq = Vec::Constant(1, 2.0);
        CohomologyPoint cp = ctx.psi(xq);
        double h = 1e-5;
        ToricPotential& rho = *m.rho;
        auto logdetA = [&](double xx) {
            return std::log(rho.hessian(Vec::Constant(1, xx))(0, 0));
        };
        double expect = (logdetA(2.0 + h) - logdetA(2.0 - h)) / (2.0 * h);
        CHECK(cp.klass[0] == doctest::Approx(expect).epsilon(1e-5));
        CHECK(cp.dalpha == doctest::Approx(0.0));
    }
    SUBCASE("resolution doubling changes Psi by < 1e-8") {
        SolverConfig cfg;
        PipelineContext c16(m.rho.get(), m.f0, m.f1, 0.5, 16, cfg);
        PipelineContext c32(m.rho.get(), m.f0, m.f1, 0.5, 32, cfg);
        Vec xq = Vec::Constant(1, 1.5);
        CHECK((c16.psi(xq).klass - c32.psi(xq).klass).norm() < 1e-8);
    }
}

TEST_CASE("dpsi_check") {
    SUBCASE("flat model: formula route is the zero matrix") {
        AnalyticPotential flat = flat_model(1);
        SolverConfig cfg;
        PipelineContext ctx(&flat, nullptr, nullptr, 0.5, 16, cfg);
        DPsiCheck dc = dpsi_check(ctx, Vec::Zero(1), 1e-3);
        CHECK(dc.formula.cwiseAbs().maxCoeff() < 1e-10);
        // and the FD route agrees: Psi is constant on the flat model
        CHECK(dc.fd.cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("injected exact Einstein Ricci gives the identity") {
        double tau = 20.0;
        Model m = model_1d(tau, 0.5, 0.05);
        SolverConfig cfg;
        PipelineContext ctx(m.rho.get(), m.f0, m.f1, 0.5, 16, cfg);
        DPsiCheck dc = dpsi_check(ctx, Vec::Constant(1, 1.0), 1e-3, -1.0);
        CHECK((dc.formula - Mat::Identity(1, 1)).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("two-route agreement at tau = 40 with improvement at tau = 80") {
        auto difference = [&](double tau) {
            Model m = model_1d(tau, 0.5, 0.05);
            SolverConfig cfg;
            PipelineContext ctx(m.rho.get(), m.f0, m.f1, 0.5, 16, cfg);
            DPsiCheck dc = dpsi_check(ctx, Vec::Constant(1, 0.05 * tau), 1e-3);
            return dc.difference;
        };
        double d40 = difference(40.0);
        double d80 = difference(80.0);
        CHECK(d40 < 0.2);
        CHECK(d80 < d40 + 1e-12);
    }
}

TEST_CASE("find_minimal") {
    double tau = 20.0;
    SUBCASE("zero perturbation: x1 = x0 = 0, the min-volume fiber is minimal") {
        Model m = model_1d(tau);
        SolverConfig cfg;
        PipelineContext ctx(m.rho.get(), nullptr, nullptr, 0.5, 16, cfg);
        MinimalTorusReport rep = find_minimal(ctx);
        CHECK(rep.x1.cwiseAbs().maxCoeff() < 1e-8);
        CHECK(rep.classification == LagClass::Minimal);
        CHECK(rep.sup_alpha < 1e-6);
    }
    SUBCASE("symmetric perturbation: root stays at the fixed point") {
        // bump centered at 0 with cos theta: even under x -> -x, th -> -th
        Model m = model_1d(tau, 0.5, 0.05, 0.0);
        SolverConfig cfg;
        PipelineContext ctx(m.rho.get(), m.f0, m.f1, 0.5, 16, cfg);
        MinimalTorusReport rep = find_minimal(ctx);
        CHECK(rep.x1.cwiseAbs().maxCoeff() < 1e-6);
        CHECK(rep.status == MinimalStatus::Minimal);
    }
    SUBCASE("asymmetric perturbation: unique interior root with certificates") {
        Model m = model_1d(tau, 0.5, 0.05, 0.2);
        SolverConfig cfg;
        PipelineContext ctx(m.rho.get(), m.f0, m.f1, 0.5, 16, cfg);
        MinimalTorusReport rep = find_minimal(ctx);
        CHECK(rep.status == MinimalStatus::Minimal);
        CHECK(rep.psi_norm < 1e-8);
        CHECK(rep.interior_margin > 0.0);
        CHECK(rep.dstar_alpha < 1e-8);
        CHECK(rep.class_norm < 1e-6);
        CHECK(rep.sup_alpha < 1e-6);
        CHECK(rep.classification == LagClass::Minimal);
    }
}
