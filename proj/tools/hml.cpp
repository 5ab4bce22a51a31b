// Batch front door: describe / solve-fiber / sweep / find-minimal / verify /
// report over a line-oriented config file.
#include "hml/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace hml;

int main(int argc, char** argv) {
    CLI::App app{"H-minimal Lagrangian torus fibrations in toric Kahler models"};
    app.require_subcommand(1);
    app.fallthrough(true); // global options may follow the subcommand

    std::string config_path, out_dir = "out", grid_spec, xpoint;
    double tau = 0.0, c = 0.0;
    int modes = 0, stages = 0;
    std::uint64_t seed = 0;
    bool quiet = false;
    bool have_seed = false;

    app.add_option("--config", config_path, "config file path");
    app.add_option("--tau", tau, "override tau");
    app.add_option("--c", c, "override the shrink factor c");
    app.add_option("--modes", modes, "override the spectral truncation N");
    app.add_option("--stages", stages, "override the continuation stage count");
    app.add_option("--grid", grid_spec, "override the sweep grid: POINTSxSPAN, e.g. 9x0.8");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "override the probe seed")->each([&](const std::string&) {
        have_seed = true;
    });
    app.add_flag("--quiet", quiet, "suppress stdout summaries");

    auto* cmd_describe = app.add_subcommand("describe", "polytope, recentering, curvature and volume profile");
    auto* cmd_solve = app.add_subcommand("solve-fiber", "continuation at one base point");
    cmd_solve->add_option("--x", xpoint, "base point, comma separated");
    auto* cmd_sweep = app.add_subcommand("sweep", "solve the fibration over the base grid");
    auto* cmd_minimal = app.add_subcommand("find-minimal", "locate the minimal Lagrangian torus");
    auto* cmd_verify = app.add_subcommand("verify", "run the oracle suite");
    auto* cmd_report = app.add_subcommand("report", "collate prior outputs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_report->parsed()) {
            RunOutput out = run_report(out_dir);
            return emit(out, out_dir, std::cout, quiet);
        }
        if (config_path.empty()) {
            std::cerr << "error: --config is required\n";
            return kConfigError;
        }
        RunConfig cfg = load_config(config_path);
        if (tau > 0.0) cfg.tau = tau;
        if (c > 0.0) cfg.c = c;
        if (modes > 0) cfg.N = modes;
        if (stages > 0) cfg.solver.stages = stages;
        if (have_seed) cfg.seed = seed;
        if (!grid_spec.empty()) {
            size_t x = grid_spec.find('x');
            if (x == std::string::npos) throw ConfigError("--grid expects POINTSxSPAN");
            cfg.grid_points = std::stoi(grid_spec.substr(0, x));
            cfg.grid_span = std::stod(grid_spec.substr(x + 1));
        }
        if (tau > 0.0 || c > 0.0) finalize_config(cfg); // rebuild tau-dependent objects

        RunOutput out;
        if (cmd_describe->parsed()) {
            out = run_describe(cfg);
        } else if (cmd_solve->parsed()) {
            Vec x = Vec::Zero(cfg.recentered_fan.n);
            if (!xpoint.empty()) {
                std::stringstream ss(xpoint);
                std::string tok;
                int i = 0;
                while (std::getline(ss, tok, ',') && i < x.size()) x[i++] = std::stod(tok);
            }
            out = run_solve_fiber(cfg, x);
        } else if (cmd_sweep->parsed()) {
            out = run_sweep(cfg);
        } else if (cmd_minimal->parsed()) {
            out = run_find_minimal(cfg);
        } else if (cmd_verify->parsed()) {
            out = run_verify(cfg);
        }
        return emit(out, out_dir, std::cout, quiet);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    }
}
