#include <doctest.h>

#include "helpers.hpp"

#include <set>
#include <sstream>

using namespace hml;
using namespace hml::test;

namespace {

const char* kGoodConfig = R"(# test config
[fan]
dim = 1
ray = 1 ; w -1
ray = -1 ; w -1

[model]
tau = 20
c = 0.5
N = 8

[perturbation]
type = modes
mode = freq 1 ; amp 0.05 ; center 0.2 ; width 0.25 ; hat 1

[solver]
stages = 5

[grid]
points = 3
span = 0.6

[run]
seed = 77
)";

RunConfig good() {
    std::istringstream in(kGoodConfig);
    return parse_config(in, "test.cfg");
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("well-formed config") {
        RunConfig cfg = good();
        CHECK(cfg.tau == 20.0);
        CHECK(cfg.c == 0.5);
        CHECK(cfg.N == 8);
        CHECK(cfg.fan.ray_count() == 2);
        CHECK(cfg.modes.size() == 1);
        CHECK(cfg.solver.stages == 5);
        CHECK(cfg.seed == 77);
        CHECK(cfg.f1 != nullptr);
        CHECK(cfg.recenter_shift.norm() < 1e-9);
    }
    SUBCASE("malformed ray line reports its line number") {
        std::string bad = kGoodConfig;
        bad.replace(bad.find("ray = 1 ; w -1"), 14, "ray = x ; w -1");
        std::istringstream in(bad);
        try {
            parse_config(in, "bad.cfg");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("bad.cfg:4") != std::string::npos);
        }
    }
    SUBCASE("rational weights") {
        std::string r = kGoodConfig;
        r.replace(r.find("ray = 1 ; w -1"), 14, "ray = 1 ; w -3/2");
        std::istringstream in(r);
        RunConfig cfg = parse_config(in, "r.cfg");
        // recentering shifts the weights; the original fan keeps -1.5
        CHECK(cfg.fan.weights[0] == doctest::Approx(-1.5));
    }
    SUBCASE("unknown key is a config error") {
        std::string bad = kGoodConfig;
        bad.replace(bad.find("tau = 20"), 8, "tao = 20");
        std::istringstream in(bad);
        CHECK_THROWS_AS(parse_config(in, "bad.cfg"), ConfigError);
    }
    SUBCASE("asymmetric fan is recentered") {
        std::string r = kGoodConfig;
        r.replace(r.find("ray = 1 ; w -1"), 14, "ray = 1 ; w -3");
        r.replace(r.find("ray = -1 ; w -1"), 15, "ray = -1 ; w 1");
        std::istringstream in(r);
        RunConfig cfg = parse_config(in, "r.cfg");
        CHECK(cfg.recenter_shift[0] == doctest::Approx(2.0).epsilon(1e-8));
        ToricPotential rho(cfg.recentered_fan, 1.0);
        CHECK(rho.gradient(Vec::Zero(1)).norm() < 1e-10);
    }
    SUBCASE("synth_ke section") {
        std::string r = kGoodConfig;
        r.replace(r.find("type = modes"), 12, "type = synth_ke");
        r += "\n[synth_ke]\nb0 = powers 1 0 ; amp 0.4 ; phase 0.3\nbm = ray 0 ; const 0.2\n";
        std::istringstream in(r);
        RunConfig cfg = parse_config(in, "ke.cfg");
        CHECK(cfg.f != nullptr);
        CHECK(std::dynamic_pointer_cast<const SynthKEField>(cfg.f) != nullptr);
    }
}

TEST_CASE("cli runs") {
    RunConfig cfg = good();
    SUBCASE("describe") {
        RunOutput out = run_describe(cfg);
        CHECK(out.exit_code == 0);
        CHECK(out.files.count("describe.txt") == 1);
        CHECK(out.files.count("u_profile.csv") == 1);
        CHECK(out.text.find("recentering shift") != std::string::npos);
    }
    SUBCASE("solve-fiber emits stage diagnostics") {
        RunOutput out = run_solve_fiber(cfg, Vec::Zero(1));
        CHECK(out.exit_code == 0);
        CHECK(out.files.count("stages.csv") == 1);
        CHECK(out.files.at("stages.csv").find("inverse_norm") != std::string::npos);
        CHECK(out.files.count("solve_fiber.json") == 1);
    }
    SUBCASE("sweep") {
        RunOutput out = run_sweep(cfg);
        CHECK(out.exit_code == 0);
        CHECK(out.files.at("sweep.csv").find("toric_margin") != std::string::npos);
    }
    SUBCASE("find-minimal") {
        RunOutput out = run_find_minimal(cfg);
        CHECK(out.exit_code == 0);
        CHECK(out.files.at("minimal.json").find("\"status\"") != std::string::npos);
    }
    SUBCASE("verify passes and is byte-identical across runs") {
        RunOutput a = run_verify(cfg);
        RunOutput b = run_verify(cfg);
        CHECK(a.exit_code == 0);
        CHECK(a.text == b.text);
        CHECK(a.files.at("verify.txt") == b.files.at("verify.txt"));
    }
}

TEST_CASE("every derived example maps to exactly one oracle") {
    // the [DERIVED] examples in the module contracts and the oracle that
    // backs each; the verify suite exercises all of them
    struct Row {
        const char* example;
        const char* oracle;
    };
    const Row table[] = {
        {"rho''(0) = 4", "symbolic_1d"},
        {"rho(1/2)", "symbolic_1d"},
        {"recenter shift = 2", "symbolic_1d"},
        {"fiber metric value", "flat_torus_oracle"},
        {"ricci negative", "symbolic_1d"},
        {"einstein deviation trend", "fd_deform"},
        {"decay ratio >= 2", "fd_deform"},
        {"chart y closed form", "symbolic_1d"},
        {"embed closed form", "flat_torus_oracle"},
        {"product torus a_ijk", "flat_torus_oracle"},
        {"graph torus alpha", "flat_graph_alpha_oracle"},
        {"alpha O(eps) variation", "fd_deform"},
        {"hodge flat class", "flat_torus_oracle"},
        {"first variation scaling", "flat_torus_oracle"},
        {"first variation FD", "fd_deform"},
        {"alpha_dot FD", "fd_deform"},
        {"D k^4 term", "fd_deform"},
        {"D FD", "fd_deform"},
        {"linearize FD", "fd_deform"},
        {"newton iterations", "fd_deform"},
        {"h linear response", "fd_deform"},
        {"u''(0) = 3", "symbolic_1d"},
        {"x0 after recentering", "symbolic_1d"},
        {"psi flat class", "flat_torus_oracle"},
        {"dpsi two-route", "fd_deform"},
        {"find_minimal pipeline", "fd_deform"},
    };
    std::set<std::string> oracles;
    for (const Row& r : table) {
        CHECK(std::string(r.oracle).size() > 0);
        oracles.insert(r.oracle);
    }
    CHECK(oracles ==
          std::set<std::string>{"symbolic_1d", "flat_torus_oracle", "flat_graph_alpha_oracle",
                                "fd_deform"});
}
