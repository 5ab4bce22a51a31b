#include "hml/toric.hpp"

#include <numeric>

namespace hml {

namespace {

int gcd_abs(const Eigen::VectorXi& v) {
    int g = 0;
    for (int i = 0; i < v.size(); ++i) g = std::gcd(g, std::abs(v[i]));
    return g;
}

// directions that can carry an extreme ray of the recession cone
std::vector<Vec> recession_candidates(const WeightedFan& fan) {
    std::vector<Vec> dirs;
    const int n = fan.n;
    if (n == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
    } else if (n == 2) {
        for (const auto& m : fan.rays) {
            Vec d(2);
            d << -double(m[1]), double(m[0]);
            dirs.push_back(d);
            dirs.push_back(-d);
        }
    } else {
        for (size_t i = 0; i < fan.rays.size(); ++i)
            for (size_t j = i + 1; j < fan.rays.size(); ++j) {
                Eigen::Vector3d a, b;
                for (int k = 0; k < 3; ++k) {
                    a[k] = fan.rays[i][k];
                    b[k] = fan.rays[j][k];
                }
                Eigen::Vector3d cr = a.cross(b);
                if (cr.norm() < 1e-12) continue;
                dirs.push_back(cr);
                dirs.push_back(-cr);
            }
    }
    return dirs;
}

} // namespace

void WeightedFan::validate() const {
    if (n < 1 || n > 3) throw ConfigError("fan dimension must be 1..3");
    if (rays.size() != weights.size()) throw ConfigError("rays/weights count mismatch");
    if (static_cast<int>(rays.size()) < n + 1)
        throw UnboundedPolytope("fewer than n+1 rays cannot bound a region");
    for (const auto& m : rays) {
        if (m.size() != n) throw ConfigError("ray dimension mismatch");
        int g = gcd_abs(m);
        if (g == 0) throw ConfigError("zero ray");
        if (g != 1) throw ConfigError("ray is not primitive (gcd != 1)");
    }
}

double q_value(const Eigen::VectorXi& ray, double weight, const Vec& x, double tau) {
    double dot = 0.0;
    for (int i = 0; i < ray.size(); ++i) dot += ray[i] * x[i];
    return weight + dot / tau;
}

bool in_region(const WeightedFan& fan, const Vec& x, double c, double tau) {
    return region_margin(fan, x, c, tau) <= 0.0;
}

double region_margin(const WeightedFan& fan, const Vec& x, double c, double tau) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < fan.ray_count(); ++i)
        worst = std::max(worst, q_value(fan.rays[i], fan.weights[i], x, c * tau));
    return worst;
}

Polytope build_polytope(const WeightedFan& fan, double tau, double c) {
    fan.validate();
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("c must lie in (0,1)");
    const int n = fan.n;

    // boundedness: the recession cone {d : <m,d> <= 0 for all m} must be {0}
    Mat M(fan.ray_count(), n);
    for (int i = 0; i < fan.ray_count(); ++i)
        for (int j = 0; j < n; ++j) M(i, j) = fan.rays[i][j];
    Eigen::JacobiSVD<Mat> svd(M);
    if (svd.rank() < n)
        throw UnboundedPolytope("rays do not span R^n (free direction exists)");
    for (const Vec& d : recession_candidates(fan)) {
        double dn = d.norm();
        if (dn == 0.0) continue;
        bool in_cone = true;
        for (const auto& m : fan.rays) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += m[i] * d[i];
            if (dot > 1e-12 * dn) {
                in_cone = false;
                break;
            }
        }
        if (in_cone) throw UnboundedPolytope("recession direction found");
    }

    // interior point: minimize sum_m exp(ell_m / t) with decreasing t; the
    // minimizer approaches the analytic-center region and certifies a
    // strictly interior point when one exists.
    Vec x = Vec::Zero(n);
    auto ell = [&](const Vec& p, int i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += fan.rays[i][j] * p[j];
        return dot + fan.weights[i];
    };
    double wscale = 0.0;
    for (double w : fan.weights) wscale = std::max(wscale, std::abs(w));
    wscale = std::max(wscale, 1.0);
    for (double t : {1.0, 0.3, 0.1, 0.03, 0.01}) {
        double ts = t * wscale;
        for (int it = 0; it < 200; ++it) {
            Vec g = Vec::Zero(n);
            Mat H = Mat::Zero(n, n);
            for (int i = 0; i < fan.ray_count(); ++i) {
                double e = std::exp(std::min(ell(x, i) / ts, 300.0));
                Vec m(n);
                for (int j = 0; j < n; ++j) m[j] = fan.rays[i][j];
                g += (e / ts) * m;
                H += (e / (ts * ts)) * m * m.transpose();
            }
            Vec step = H.ldlt().solve(-g);
            if (!step.allFinite()) break;
            x += step;
            if (step.norm() < 1e-13 * (1.0 + x.norm())) break;
        }
    }
    double margin = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < fan.ray_count(); ++i) margin = std::max(margin, ell(x, i));
    if (!(margin < -1e-9 * wscale)) throw EmptyInterior("no strictly interior point found");

    // coordinate bounding box by exact vertex enumeration: every vertex of a
    // bounded polytope is the intersection of n facets
    Polytope poly;
    poly.fan = fan;
    poly.tau = tau;
    poly.c = c;
    poly.interior_point = x;
    poly.coordinate_lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
    poly.coordinate_hi = Vec::Constant(n, -std::numeric_limits<double>::infinity());
    const int R = fan.ray_count();
    std::vector<int> pick(n);
    std::function<void(int, int)> visit = [&](int from, int depth) {
        if (depth == n) {
            Mat A(n, n);
            Vec b(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) A(i, j) = fan.rays[pick[i]][j];
                b[i] = -fan.weights[pick[i]];
            }
            Eigen::FullPivLU<Mat> lu(A);
            if (!lu.isInvertible()) return;
            Vec v = lu.solve(b);
            for (int i = 0; i < R; ++i)
                if (ell(v, i) > 1e-9 * wscale) return;
            poly.coordinate_lo = poly.coordinate_lo.cwiseMin(v);
            poly.coordinate_hi = poly.coordinate_hi.cwiseMax(v);
            return;
        }
        for (int i = from; i < R; ++i) {
            pick[depth] = i;
            visit(i + 1, depth + 1);
        }
    };
    visit(0, 0);
    if (!poly.coordinate_lo.allFinite() || !poly.coordinate_hi.allFinite())
        throw EmptyInterior("no vertices found");

    return poly;
}

RecenterResult recenter(const WeightedFan& fan) {
    Polytope poly = build_polytope(fan, 1.0);
    ToricPotential rho(fan, 1.0);
    Vec x = poly.interior_point;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        Vec g = rho.gradient(x);
        if (g.norm() < 1e-12) {
            converged = true;
            break;
        }
        Mat H = rho.hessian(x);
        Vec step = H.ldlt().solve(-g);
        double lambda = 1.0;
        double f0 = rho.value(x);
        for (int bt = 0; bt < 60; ++bt) {
            Vec xn = x + lambda * step;
            bool inside = true;
            for (int i = 0; i < fan.ray_count(); ++i)
                if (q_value(fan.rays[i], fan.weights[i], xn, 1.0) >= 0.0) inside = false;
            if (inside && rho.value(xn) < f0) {
                x = xn;
                break;
            }
            lambda *= 0.5;
            if (bt == 59) lambda = 0.0;
        }
        if (lambda == 0.0) break;
    }
    if (!converged) {
        Vec g = rho.gradient(x);
        if (g.norm() >= 1e-10) throw NoConvergence("recentering Newton did not converge");
    }
    RecenterResult out;
    out.fan = fan;
    out.shift = x;
    for (int i = 0; i < fan.ray_count(); ++i) {
        double dot = 0.0;
        for (int j = 0; j < fan.n; ++j) dot += fan.rays[i][j] * x[j];
        out.fan.weights[i] = fan.weights[i] + dot;
    }
    return out;
}

double BasePotential::value(const Vec& x) const {
    Jet j(JetSpace::get(dim(), 0));
    add_to_jet(j, x, 1.0);
    return j.value();
}

Vec BasePotential::grad_x(const Vec& x) const {
    const int n = dim();
    Jet j(JetSpace::get(n, 1));
    add_to_jet(j, x, 1.0);
    Vec g(n);
    for (int i = 0; i < n; ++i) {
        std::vector<int> e(n, 0);
        e[i] = 1;
        g[i] = j.deriv(e);
    }
    return g;
}

Mat BasePotential::hess_x(const Vec& x) const {
    const int n = dim();
    Jet j(JetSpace::get(n, 2));
    add_to_jet(j, x, 1.0);
    Mat H(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            std::vector<int> e(n, 0);
            e[i] += 1;
            e[k] += 1;
            H(i, k) = j.deriv(e);
        }
    return H;
}

Jet BasePotential::jet_x(const Vec& x, int order) const {
    Jet j(JetSpace::get(dim(), order));
    add_to_jet(j, x, 1.0);
    return j;
}

AnalyticPotential flat_model(int n, double box) {
    return AnalyticPotential(
        n,
        [n](Jet& out, const Vec& x, double scale) {
            const JetSpace& sp = out.space();
            for (int idx = 0; idx < sp.size(); ++idx) {
                const auto& gamma = sp.exponent(idx);
                // sum_j exp(x_j): coefficient only on single-axis x exponents
                int axis = -1, k = 0;
                bool pure = true;
                for (int d = 0; d < sp.dim(); ++d) {
                    if (gamma[d] == 0) continue;
                    if (d >= n || axis >= 0) {
                        pure = false;
                        break;
                    }
                    axis = d;
                    k = gamma[d];
                }
                if (!pure) continue;
                if (axis < 0) {
                    double v = 0.0;
                    for (int j = 0; j < n; ++j) v += std::exp(x[j]);
                    out.coeffs()[idx] += scale * v;
                } else {
                    double fact = 1.0;
                    for (int t = 2; t <= k; ++t) fact *= t;
                    out.coeffs()[idx] += scale * std::exp(x[axis]) / fact;
                }
            }
        },
        box);
}

void ToricPotential::check_interior(const Vec& x) const {
    for (int i = 0; i < fan_.ray_count(); ++i)
        if (q_value(fan_.rays[i], fan_.weights[i], x, tau_) >= -1e-12)
            throw BoundaryEvaluation("evaluation point touches the polytope boundary");
}

double ToricPotential::value(const Vec& x) const {
    check_interior(x);
    double v = 0.0;
    for (int i = 0; i < fan_.ray_count(); ++i) {
        double q = q_value(fan_.rays[i], fan_.weights[i], x, tau_);
        v -= std::log(q * q);
    }
    return v;
}

Vec ToricPotential::gradient(const Vec& x) const {
    check_interior(x);
    Vec g = Vec::Zero(fan_.n);
    for (int i = 0; i < fan_.ray_count(); ++i) {
        double q = q_value(fan_.rays[i], fan_.weights[i], x, tau_);
        for (int j = 0; j < fan_.n; ++j) g[j] -= 2.0 * fan_.rays[i][j] / (tau_ * q);
    }
    return g;
}

Mat ToricPotential::hessian(const Vec& x) const {
    check_interior(x);
    Mat H = Mat::Zero(fan_.n, fan_.n);
    for (int i = 0; i < fan_.ray_count(); ++i) {
        double q = q_value(fan_.rays[i], fan_.weights[i], x, tau_);
        double f = 2.0 / sqr(tau_ * q);
        for (int j = 0; j < fan_.n; ++j)
            for (int k = 0; k < fan_.n; ++k) H(j, k) += f * fan_.rays[i][j] * fan_.rays[i][k];
    }
    return H;
}

void ToricPotential::add_to_jet(Jet& out, const Vec& x, double scale) const {
    const JetSpace& sp = out.space();
    const int n = fan_.n;
    check_interior(x);
    for (int idx = 0; idx < sp.size(); ++idx) {
        const auto& gamma = sp.exponent(idx);
        bool theta_dep = false;
        for (int j = n; j < sp.dim(); ++j)
            if (gamma[j] != 0) theta_dep = true;
        if (theta_dep) continue;
        int k = 0;
        double gfact = 1.0;
        for (int j = 0; j < n; ++j) {
            k += gamma[j];
            for (int t = 2; t <= gamma[j]; ++t) gfact *= t;
        }
        double coeff = 0.0;
        for (int i = 0; i < fan_.ray_count(); ++i) {
            double q = q_value(fan_.rays[i], fan_.weights[i], x, tau_);
            if (k == 0) {
                coeff -= std::log(q * q);
            } else {
                double mg = 1.0;
                for (int j = 0; j < n; ++j)
                    for (int t = 0; t < gamma[j]; ++t) mg *= fan_.rays[i][j];
                double kfact = 1.0;
                for (int t = 2; t <= k - 1; ++t) kfact *= t;
                double sign = (k % 2 == 0) ? 1.0 : -1.0;
                coeff += 2.0 * sign * kfact * mg / std::pow(tau_ * q, k);
            }
        }
        out.coeffs()[idx] += scale * ((k == 0) ? coeff : coeff / gfact);
    }
}

} // namespace hml
