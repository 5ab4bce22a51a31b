#include "hml/config.hpp"

#include <fstream>
#include <sstream>

namespace hml {

namespace {

[[noreturn]] void fail(const std::string& name, int line, const std::string& msg) {
    throw ConfigError(name + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& tok, const std::string& name, int line) {
    // rational literal p/q or plain floating point
    size_t slash = tok.find('/');
    try {
        size_t used = 0;
        if (slash != std::string::npos) {
            double p = std::stod(tok.substr(0, slash), &used);
            if (used != slash) fail(name, line, "bad rational numerator '" + tok + "'");
            double q = std::stod(tok.substr(slash + 1), &used);
            if (used != tok.size() - slash - 1 || q == 0.0)
                fail(name, line, "bad rational '" + tok + "'");
            return p / q;
        }
        double v = std::stod(tok, &used);
        if (used != tok.size()) fail(name, line, "bad number '" + tok + "'");
        return v;
    } catch (const std::invalid_argument&) {
        fail(name, line, "bad number '" + tok + "'");
    } catch (const std::out_of_range&) {
        fail(name, line, "number out of range '" + tok + "'");
    }
}

// parse "key v1 v2 ; key v ; flagless" clause lists
struct Clause {
    std::string key;
    std::vector<double> values;
};

std::vector<Clause> parse_clauses(const std::string& rhs, const std::string& name, int line) {
    std::vector<Clause> out;
    std::vector<std::string> parts;
    {
        std::string acc;
        for (char ch : rhs) {
            if (ch == ';') {
                parts.push_back(acc);
                acc.clear();
            } else {
                acc += ch;
            }
        }
        parts.push_back(acc);
    }
    for (const std::string& p : parts) {
        std::istringstream ss(p);
        Clause c;
        if (!(ss >> c.key)) continue;
        std::string tok;
        while (ss >> tok) c.values.push_back(parse_number(tok, name, line));
        out.push_back(std::move(c));
    }
    return out;
}

ModeTerm parse_mode(const std::string& rhs, int n, const std::string& name, int line) {
    ModeTerm m;
    m.center = Vec::Zero(n);
    m.width = Vec::Constant(n, 0.25);
    m.freq = Eigen::VectorXi::Zero(n);
    for (const Clause& c : parse_clauses(rhs, name, line)) {
        if (c.key == "freq") {
            if (static_cast<int>(c.values.size()) != n) fail(name, line, "freq needs n entries");
            for (int i = 0; i < n; ++i) m.freq[i] = static_cast<int>(std::lround(c.values[i]));
        } else if (c.key == "amp") {
            if (c.values.size() != 1) fail(name, line, "amp needs one value");
            m.amp = c.values[0];
        } else if (c.key == "phase") {
            if (c.values.size() != 1) fail(name, line, "phase needs one value");
            m.phase = c.values[0];
        } else if (c.key == "center") {
            if (static_cast<int>(c.values.size()) != n) fail(name, line, "center needs n entries");
            for (int i = 0; i < n; ++i) m.center[i] = c.values[i];
        } else if (c.key == "width") {
            if (static_cast<int>(c.values.size()) != n && c.values.size() != 1)
                fail(name, line, "width needs n entries");
            for (int i = 0; i < n; ++i)
                m.width[i] = c.values[c.values.size() == 1 ? 0 : i];
        } else if (c.key == "taupow") {
            if (c.values.size() != 1) fail(name, line, "taupow needs one value");
            m.tau_power = c.values[0];
        } else if (c.key == "tauref") {
            if (c.values.size() != 1) fail(name, line, "tauref needs one value");
            m.tau_ref = c.values[0];
        } else if (c.key == "hat") {
            if (c.values.size() != 1) fail(name, line, "hat needs 0 or 1");
            m.hat_scale = c.values[0] != 0.0;
        } else if (c.key == "powers") {
            m.profile = ModeTerm::kSMono;
            m.powers.assign(c.values.begin(), c.values.end());
        } else if (c.key == "ray" || c.key == "const") {
            // handled by the caller for bm entries
        } else {
            fail(name, line, "unknown mode field '" + c.key + "'");
        }
    }
    return m;
}

} // namespace

std::vector<Vec> RunConfig::sweep_grid() const {
    // grid along the first axis of Delta_{c tau}, centered at the origin
    std::vector<Vec> pts;
    const int n = recentered_fan.n;
    // half-width along +-e_1 by bisection on the region test
    auto inside = [&](const Vec& x) { return in_region(recentered_fan, x, c, tau); };
    Vec e = Vec::Zero(n);
    e[0] = 1.0;
    double hi = 1.0;
    while (inside(hi * e) && hi < 1e8) hi *= 2.0;
    double lo = 0.0;
    for (int b = 0; b < 200; ++b) {
        double mid = 0.5 * (lo + hi);
        (inside(mid * e) ? lo : hi) = mid;
    }
    double half = lo * grid_span;
    for (int k = 0; k < grid_points; ++k) {
        double t = grid_points == 1 ? 0.0 : -1.0 + 2.0 * k / (grid_points - 1.0);
        pts.push_back(t * half * e);
    }
    return pts;
}

RunConfig parse_config(std::istream& in, const std::string& name) {
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    int fan_dim = 0;
    std::vector<std::pair<Eigen::VectorXi, double>> rays;

    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        size_t hash = t.find('#');
        if (hash != std::string::npos) t = trim(t.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') fail(name, lineno, "unterminated section header");
            section = t.substr(1, t.size() - 2);
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) fail(name, lineno, "expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string rhs = trim(t.substr(eq + 1));

        if (section == "fan") {
            if (key == "dim") {
                fan_dim = static_cast<int>(parse_number(rhs, name, lineno));
                if (fan_dim < 1 || fan_dim > 3) fail(name, lineno, "dim must be 1..3");
            } else if (key == "ray") {
                if (fan_dim == 0) fail(name, lineno, "dim must precede rays");
                auto clauses = parse_clauses(rhs, name, lineno);
                Eigen::VectorXi m(fan_dim);
                double w = 0.0;
                bool saw_ray = false, saw_w = false;
                for (auto& c : clauses) {
                    if (c.key == "w") {
                        if (c.values.size() != 1) fail(name, lineno, "w needs one value");
                        w = c.values[0];
                        saw_w = true;
                    } else {
                        // the ray components are the clause key plus values
                        std::vector<double> comps;
                        comps.push_back(parse_number(c.key, name, lineno));
                        for (double v : c.values) comps.push_back(v);
                        if (static_cast<int>(comps.size()) != fan_dim)
                            fail(name, lineno, "ray needs dim integer entries");
                        for (int i = 0; i < fan_dim; ++i) {
                            double r = comps[i];
                            if (r != std::floor(r)) fail(name, lineno, "ray entries must be integers");
                            m[i] = static_cast<int>(r);
                        }
                        saw_ray = true;
                    }
                }
                if (!saw_ray || !saw_w) fail(name, lineno, "ray line needs components and w");
                rays.emplace_back(m, w);
            } else {
                fail(name, lineno, "unknown fan key '" + key + "'");
            }
        } else if (section == "model") {
            if (key == "tau")
                cfg.tau = parse_number(rhs, name, lineno);
            else if (key == "c")
                cfg.c = parse_number(rhs, name, lineno);
            else if (key == "N")
                cfg.N = static_cast<int>(parse_number(rhs, name, lineno));
            else
                fail(name, lineno, "unknown model key '" + key + "'");
        } else if (section == "perturbation") {
            if (key == "type") {
                if (rhs == "none")
                    cfg.ptype = RunConfig::PerturbationType::None;
                else if (rhs == "modes")
                    cfg.ptype = RunConfig::PerturbationType::Modes;
                else if (rhs == "synth_ke")
                    cfg.ptype = RunConfig::PerturbationType::SynthKE;
                else
                    fail(name, lineno, "unknown perturbation type '" + rhs + "'");
            } else if (key == "mode") {
                if (fan_dim == 0) fail(name, lineno, "fan section must precede modes");
                cfg.modes.push_back(parse_mode(rhs, fan_dim, name, lineno));
            } else {
                fail(name, lineno, "unknown perturbation key '" + key + "'");
            }
        } else if (section == "synth_ke") {
            if (fan_dim == 0) fail(name, lineno, "fan section must precede synth_ke");
            cfg.synth.enabled = true;
            if (key == "b0")
                cfg.synth.b0.push_back(parse_mode(rhs, fan_dim, name, lineno));
            else if (key == "b1")
                cfg.synth.b1.push_back(parse_mode(rhs, fan_dim, name, lineno));
            else if (key == "bm") {
                auto clauses = parse_clauses(rhs, name, lineno);
                int ray = -1;
                double cval = 0.0;
                bool has_mode = false;
                ModeTerm m = parse_mode(rhs, fan_dim, name, lineno);
                for (auto& c : clauses) {
                    if (c.key == "ray") {
                        if (c.values.size() != 1) fail(name, lineno, "ray needs an index");
                        ray = static_cast<int>(c.values[0]);
                    } else if (c.key == "const") {
                        if (c.values.size() != 1) fail(name, lineno, "const needs one value");
                        cval = c.values[0];
                    } else if (c.key == "powers" || c.key == "freq") {
                        has_mode = true;
                    }
                }
                if (ray < 0 || ray >= static_cast<int>(rays.size()))
                    fail(name, lineno, "bm ray index out of range");
                if (static_cast<int>(cfg.synth.bm_const.size()) < ray + 1) {
                    cfg.synth.bm_const.resize(rays.size(), 0.0);
                    cfg.synth.bm_modes.resize(rays.size());
                }
                cfg.synth.bm_const[ray] = cval;
                if (has_mode) cfg.synth.bm_modes[ray].push_back(m);
            } else {
                fail(name, lineno, "unknown synth_ke key '" + key + "'");
            }
        } else if (section == "solver") {
            if (key == "newton_tol")
                cfg.solver.newton_tol = parse_number(rhs, name, lineno);
            else if (key == "max_newton")
                cfg.solver.max_newton = static_cast<int>(parse_number(rhs, name, lineno));
            else if (key == "stages")
                cfg.solver.stages = static_cast<int>(parse_number(rhs, name, lineno));
            else if (key == "min_step")
                cfg.solver.min_step = parse_number(rhs, name, lineno);
            else if (key == "ode_tol")
                cfg.solver.ode_tol = parse_number(rhs, name, lineno);
            else if (key == "linear_tol")
                cfg.solver.linear_tol = parse_number(rhs, name, lineno);
            else
                fail(name, lineno, "unknown solver key '" + key + "'");
        } else if (section == "grid") {
            if (key == "points")
                cfg.grid_points = static_cast<int>(parse_number(rhs, name, lineno));
            else if (key == "span")
                cfg.grid_span = parse_number(rhs, name, lineno);
            else
                fail(name, lineno, "unknown grid key '" + key + "'");
        } else if (section == "run") {
            if (key == "seed")
                cfg.seed = static_cast<std::uint64_t>(parse_number(rhs, name, lineno));
            else if (key == "hodge_tol_minimal")
                cfg.hodge.tol_minimal = parse_number(rhs, name, lineno);
            else if (key == "hodge_tol_h")
                cfg.hodge.tol_h = parse_number(rhs, name, lineno);
            else
                fail(name, lineno, "unknown run key '" + key + "'");
        } else if (section.empty()) {
            fail(name, lineno, "key outside any section");
        } else {
            fail(name, lineno, "unknown section '" + section + "'");
        }
    }

    if (rays.empty()) fail(name, lineno, "config has no fan rays");
    cfg.fan.n = fan_dim;
    for (auto& [m, w] : rays) {
        cfg.fan.rays.push_back(m);
        cfg.fan.weights.push_back(w);
    }
    finalize_config(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, path);
}

void finalize_config(RunConfig& cfg) {
    cfg.fan.validate();
    build_polytope(cfg.fan, cfg.tau, cfg.c); // certify boundedness + interior
    RecenterResult rc = recenter(cfg.fan);
    cfg.recentered_fan = rc.fan;
    cfg.recenter_shift = rc.shift;
    cfg.rho_tau = std::make_shared<ToricPotential>(cfg.recentered_fan, cfg.tau);

    const int n = cfg.recentered_fan.n;
    auto scale_modes = [&](std::vector<ModeTerm> ms) {
        // gauss centers and widths are fractions of tau in the config
        for (auto& m : ms) {
            if (m.profile == ModeTerm::kGauss) {
                m.center *= cfg.tau;
                m.width *= cfg.tau;
            }
        }
        return ms;
    };

    cfg.f = nullptr;
    if (cfg.ptype == RunConfig::PerturbationType::Modes && !cfg.modes.empty()) {
        cfg.f = std::make_shared<ModeSum>(scale_modes(cfg.modes), cfg.recentered_fan, cfg.tau);
    } else if (cfg.ptype == RunConfig::PerturbationType::SynthKE) {
        FieldPtr b0, b1;
        if (!cfg.synth.b0.empty())
            b0 = std::make_shared<ModeSum>(scale_modes(cfg.synth.b0), cfg.recentered_fan, cfg.tau);
        if (!cfg.synth.b1.empty())
            b1 = std::make_shared<ModeSum>(scale_modes(cfg.synth.b1), cfg.recentered_fan, cfg.tau);
        std::vector<double> bmc = cfg.synth.bm_const;
        bmc.resize(cfg.recentered_fan.rays.size(), 0.0);
        std::vector<FieldPtr> bmf;
        for (size_t r = 0; r < cfg.recentered_fan.rays.size(); ++r) {
            if (r < cfg.synth.bm_modes.size() && !cfg.synth.bm_modes[r].empty())
                bmf.push_back(std::make_shared<ModeSum>(scale_modes(cfg.synth.bm_modes[r]),
                                                        cfg.recentered_fan, cfg.tau));
            else
                bmf.push_back(nullptr);
        }
        cfg.f = std::make_shared<SynthKEField>(cfg.recentered_fan, cfg.tau, b0, b1,
                                               std::move(bmc), std::move(bmf));
    }

    if (cfg.f) {
        auto split = fiber_decompose(cfg.f, n, 2 * cfg.N + 1);
        cfg.f0 = split.f0;
        cfg.f1 = split.f1;
        // drop empty mode sums so trivial flows are recognized
        auto empty_sum = [](const FieldPtr& p) {
            auto ms = std::dynamic_pointer_cast<const ModeSum>(p);
            return ms && ms->terms().empty();
        };
        if (empty_sum(cfg.f0)) cfg.f0 = nullptr;
        if (empty_sum(cfg.f1)) cfg.f1 = nullptr;
    } else {
        cfg.f0 = nullptr;
        cfg.f1 = nullptr;
    }
}

} // namespace hml
