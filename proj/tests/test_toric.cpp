#include <doctest.h>

#include "helpers.hpp"

using namespace hml;
using namespace hml::test;

TEST_CASE("jet arithmetic basics") {
    auto sp = JetSpace::get(2, 4);
    Jet x = Jet::variable(sp, 0, 0.3);
    Jet y = Jet::variable(sp, 1, -0.2);
    Jet f = exp(x * y) + log(2.0 + x) * sin(y);
    // cross-check one mixed derivative against finite differences
    auto eval = [](double a, double b) {
        return std::exp(a * b) + std::log(2.0 + a) * std::sin(b);
    };
    double h = 1e-5;
    double fd = (eval(0.3 + h, -0.2 + h) - eval(0.3 + h, -0.2 - h) - eval(0.3 - h, -0.2 + h) +
                 eval(0.3 - h, -0.2 - h)) /
                (4.0 * h * h);
    CHECK(f.deriv({1, 1}) == doctest::Approx(fd).epsilon(1e-6));
    CHECK(f.value() == doctest::Approx(eval(0.3, -0.2)).epsilon(1e-14));

    Jet q = inv(Jet::constant(sp, 2.0) + x);
    CHECK(q.value() == doctest::Approx(1.0 / 2.3).epsilon(1e-14));
    Jet s = sqrt(Jet::constant(sp, 4.0) + x);
    CHECK(s.value() == doctest::Approx(std::sqrt(4.3)).epsilon(1e-14));
}

TEST_CASE("symbolic oracle: built-in family") {
    // rho = e^x: all derivatives e^x
    Symbolic1D es(sym::exp(sym::var()));
    for (int k = 0; k <= 6; ++k) CHECK(es.deriv(k, 0.7) == doctest::Approx(std::exp(0.7)));
    // sum linearity
    Symbolic1D sum(sym::add(sym::exp(sym::var()), sym::scale(3.0, sym::var())));
    CHECK(sum.deriv(1, 0.2) == doctest::Approx(std::exp(0.2) + 3.0));
    CHECK(sum.deriv(2, 0.2) == doctest::Approx(std::exp(0.2)));
    // the model potential: rho'' (0) = 4, rho'''' (0) = 24, cross-checked by FD
    Symbolic1D rho(sym_presets::toric_1d({1.0, -1.0}, {-1.0, -1.0}));
    CHECK(rho.deriv(2, 0.0) == doctest::Approx(4.0));
    CHECK(rho.deriv(4, 0.0) == doctest::Approx(24.0));
    double h = 1e-4;
    double fd2 = (rho.deriv(0, h) - 2.0 * rho.deriv(0, 0.0) + rho.deriv(0, -h)) / (h * h);
    CHECK(rho.deriv(2, 0.0) == doctest::Approx(fd2).epsilon(1e-6));
    double fd4 = (rho.deriv(2, h) - 2.0 * rho.deriv(2, 0.0) + rho.deriv(2, -h)) / (h * h);
    CHECK(rho.deriv(4, 0.0) == doctest::Approx(fd4).epsilon(1e-5));
}

TEST_CASE("build_polytope examples") {
    Polytope p1 = build_polytope(fan_1d(), 1.0);
    CHECK(p1.coordinate_lo[0] == doctest::Approx(-1.0));
    CHECK(p1.coordinate_hi[0] == doctest::Approx(1.0));

    // half-line: one-sided rays
    WeightedFan half;
    half.n = 1;
    half.rays = {Eigen::VectorXi::Constant(1, 1), Eigen::VectorXi::Constant(1, 1)};
    half.weights = {-1.0, -2.0};
    CHECK_THROWS_AS(build_polytope(half, 1.0), UnboundedPolytope);

    // square [-2, 2]^2 at tau = 2
    Polytope p2 = build_polytope(fan_square(), 2.0);
    CHECK(p2.coordinate_lo[0] == doctest::Approx(-1.0)); // tau = 1 box
    CHECK(p2.coordinate_hi[1] == doctest::Approx(1.0));

    // empty interior: contradictory weights
    WeightedFan empty = fan_1d(1.0, 1.0); // x <= -1 and x >= 1
    CHECK_THROWS_AS(build_polytope(empty, 1.0), EmptyInterior);
}

TEST_CASE("q_value and in_region") {
    WeightedFan fan = fan_1d();
    CHECK(q_value(fan.rays[0], -1.0, Vec::Zero(1), 7.0) == -1.0);
    CHECK(q_value(fan.rays[0], -1.0, Vec::Constant(1, 5.0), 10.0) == doctest::Approx(-0.5));
    // facet of Delta_tau: x = tau
    CHECK(q_value(fan.rays[0], -1.0, Vec::Constant(1, 10.0), 10.0) == doctest::Approx(0.0));

    CHECK(in_region(fan, Vec::Zero(1), 0.5, 10.0));
    CHECK(in_region(fan, Vec::Constant(1, 5.0), 0.5, 10.0));
    CHECK(!in_region(fan, Vec::Constant(1, 5.01), 0.5, 10.0));

    WeightedFan sq = fan_square();
    Vec xy(2);
    xy << 0.9, 1.1;
    CHECK(!in_region(sq, xy, 0.5, 2.0));
    xy << 0.9, 0.9;
    CHECK(in_region(sq, xy, 0.5, 2.0));
}

TEST_CASE("rho jets: closed form vs oracle and finite differences") {
    ToricPotential rho(fan_1d(), 1.0);
    Symbolic1D sym(sym_presets::toric_1d({1.0, -1.0}, {-1.0, -1.0}));

    Jet j0 = rho.jet_x(Vec::Zero(1), 5);
    CHECK(j0.value() == doctest::Approx(0.0));
    CHECK(j0.deriv({1}) == doctest::Approx(0.0));
    CHECK(j0.deriv({2}) == doctest::Approx(4.0));
    CHECK(rho.value(Vec::Constant(1, 0.5)) == doctest::Approx(-2.0 * std::log(0.75)));

    for (double x : {-0.6, 0.1, 0.45}) {
        Jet j = rho.jet_x(Vec::Constant(1, x), 5);
        for (int k = 0; k <= 5; ++k)
            CHECK(j.deriv(std::vector<int>(1, k)) ==
                  doctest::Approx(sym.deriv(k, x)).epsilon(1e-9));
    }

    // order-k output matches centered FD of order-(k-1), step 1e-4
    double step = 1e-4;
    for (int k = 1; k <= 5; ++k) {
        double fd =
            (rho.jet_x(Vec::Constant(1, 0.2 + step), 5).deriv(std::vector<int>(1, k - 1)) -
             rho.jet_x(Vec::Constant(1, 0.2 - step), 5).deriv(std::vector<int>(1, k - 1))) /
            (2.0 * step);
        double an = rho.jet_x(Vec::Constant(1, 0.2), 5).deriv(std::vector<int>(1, k));
        CHECK(std::abs(fd - an) / std::max(1.0, std::abs(an)) < 1e-6);
    }

    CHECK_THROWS_AS(rho.value(Vec::Constant(1, 1.0)), BoundaryEvaluation);
}

TEST_CASE("rho jets in two dimensions") {
    ToricPotential rho(fan_square(), 1.0);
    // product structure: rho(x1, x2) = rho1(x1) + rho1(x2)
    Symbolic1D sym(sym_presets::toric_1d({1.0, -1.0}, {-1.0, -1.0}));
    Vec x(2);
    x << 0.3, -0.4;
    Jet j = rho.jet_x(x, 4);
    CHECK(j.value() == doctest::Approx(sym.deriv(0, 0.3) + sym.deriv(0, -0.4)));
    CHECK(j.deriv({1, 0}) == doctest::Approx(sym.deriv(1, 0.3)));
    CHECK(j.deriv({0, 2}) == doctest::Approx(sym.deriv(2, -0.4)));
    CHECK(j.deriv({1, 1}) == doctest::Approx(0.0));
    CHECK(j.deriv({2, 2}) == doctest::Approx(0.0));
}

TEST_CASE("recenter") {
    // symmetric model is unchanged
    RecenterResult rc0 = recenter(fan_1d());
    CHECK(rc0.shift.norm() < 1e-9);

    // w = {-3, +1}: Delta = [1, 3], minimum at 2
    WeightedFan fan = fan_1d(-3.0, 1.0);
    RecenterResult rc = recenter(fan);
    CHECK(rc.shift[0] == doctest::Approx(2.0).epsilon(1e-9));
    ToricPotential rho(rc.fan, 1.0);
    CHECK(rho.gradient(Vec::Zero(1)).norm() < 1e-10);
    // geometry unchanged up to translation
    Polytope p = build_polytope(rc.fan, 1.0);
    CHECK(p.coordinate_lo[0] == doctest::Approx(-1.0));
    CHECK(p.coordinate_hi[0] == doctest::Approx(1.0));
}

TEST_CASE("Hessian positive definite at 200 random interior points") {
    ToricPotential rho(fan_square(), 1.0);
    Rng rng(2024);
    double min_eig = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 200; ++t) {
        Vec x = rng.uniform_vec(2, -0.95, 0.95);
        Eigen::SelfAdjointEigenSolver<Mat> es(rho.hessian(x));
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    CHECK(min_eig > 0.0);
}

TEST_CASE("rho_tau(x) - rho(x/tau) is constant") {
    double tau = 17.0;
    ToricPotential rho_t(fan_1d(), tau);
    ToricPotential rho_1(fan_1d(), 1.0);
    Rng rng(7);
    std::vector<double> d;
    for (int t = 0; t < 100; ++t) {
        Vec x = Vec::Constant(1, rng.uniform(-0.9, 0.9) * tau);
        d.push_back(rho_t.value(x) - rho_1.value(x / tau));
    }
    double mean = 0.0, var = 0.0;
    for (double v : d) mean += v / d.size();
    for (double v : d) var += sqr(v - mean) / d.size();
    CHECK(var < 1e-12);
}

TEST_CASE("boundary blow-up") {
    ToricPotential rho(fan_1d(), 1.0);
    CHECK(rho.value(Vec::Constant(1, 1.0 - 1e-3)) > rho.value(Vec::Zero(1)) + 10.0);
}
