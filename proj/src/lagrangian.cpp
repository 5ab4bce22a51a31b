#include "hml/lagrangian.hpp"

namespace hml {

FiberChart::FiberChart(const BasePotential* base, FieldPtr f0, double scale, Vec xstar,
                       double region_c)
    : base_(base), f0_(std::move(f0)), scale_(scale), xstar_(std::move(xstar)) {
    const int n = dim();

    ystar_ = rho0_grad(xstar_);
    A_star_ = rho0_hess(xstar_);

    Eigen::SelfAdjointEigenSolver<Mat> es(A_star_);
    double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e8)
        throw ChartDegenerate("Hessian condition number too large at chart point");

    // chart x-radius: distance to the boundary of Delta_{c'tau}, c' between
    // region_c and 1, so embedded tori stay safely inside the metric domain
    double cprime = region_c > 0.0 ? 0.5 * (1.0 + region_c) : 0.95;
    radius_x_ = base_->boundary_distance(xstar_, cprime);
    if (!(radius_x_ > 0.0)) throw OutOfChart("chart base point outside the working region");
    radius_y_ = 0.9 * lmin * radius_x_;

    // Darboux check at probe points: in (theta, y) coordinates the toric
    // symplectic form must be exactly sum dy ^ dtheta.
    AmbientMetric amb(base_, f0_, nullptr, 0.0, scale_);
    Rng rng(20240901);
    darboux_defect_ = 0.0;
    for (int p = 0; p < 10; ++p) {
        Vec x = xstar_;
        for (int j = 0; j < n; ++j) x[j] += 0.2 * radius_x_ * (2.0 * rng.uniform() - 1.0);
        AmbientJets J = amb.eval(x, Vec::Zero(n), false, false);
        Mat Ax = rho0_hess(x);
        Mat Axinv = Ax.inverse();
        // frame: d/dy_j = (A^{-1})_j in x, d/dtheta_k
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Vec ey = Vec::Zero(2 * n), et = Vec::Zero(2 * n);
                ey.head(n) = Axinv.col(j);
                et[n + k] = 1.0;
                double w_yt = ey.dot(J.Omega * et);
                darboux_defect_ = std::max(darboux_defect_, std::abs(w_yt - (j == k ? 1.0 : 0.0)));
                Vec ey2 = Vec::Zero(2 * n);
                ey2.head(n) = Axinv.col(k);
                darboux_defect_ = std::max(darboux_defect_, std::abs(ey.dot(J.Omega * ey2)));
            }
    }
}

double FiberChart::rho0_value(const Vec& x) const {
    double v = scale_ * base_->value(x);
    if (f0_) {
        Jet j(JetSpace::get(2 * dim(), 0));
        f0_->add_to_jet(j, x, Vec::Zero(dim()), scale_);
        v += j.value();
    }
    return v;
}

Vec FiberChart::rho0_grad(const Vec& x) const {
    const int n = dim();
    Vec g = scale_ * base_->grad_x(x);
    if (f0_) {
        Jet j(JetSpace::get(2 * n, 1));
        f0_->add_to_jet(j, x, Vec::Zero(n), scale_);
        for (int i = 0; i < n; ++i) {
            std::vector<int> e(2 * n, 0);
            e[i] = 1;
            g[i] += j.deriv(e);
        }
    }
    return g;
}

Mat FiberChart::rho0_hess(const Vec& x) const {
    const int n = dim();
    Mat H = scale_ * base_->hess_x(x);
    if (f0_) {
        Jet j(JetSpace::get(2 * n, 2));
        f0_->add_to_jet(j, x, Vec::Zero(n), scale_);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                std::vector<int> e(2 * n, 0);
                e[i] += 1;
                e[k] += 1;
                H(i, k) += j.deriv(e);
            }
    }
    return H;
}

Vec FiberChart::x_of_y(const Vec& y) const {
    if (y.norm() > radius_y_)
        throw OutOfChart("target action coordinate beyond chart radius");
    Vec x = xstar_;
    const double grad_scale = 1.0 + ystar_.norm() + std::abs(scale_) * 0.1;
    bool close = false;
    for (int it = 0; it < 50; ++it) {
        Vec r = rho0_grad(x) - ystar_ - y;
        if (r.norm() < 1e-12 * grad_scale) {
            if (close) return x; // one polishing step taken after convergence
            close = true;
        }
        Vec step = rho0_hess(x).ldlt().solve(-r);
        // keep iterates inside the chart ball
        double lambda = 1.0;
        for (int bt = 0; bt < 40; ++bt) {
            Vec xn = x + lambda * step;
            if ((xn - xstar_).norm() <= chart_radius_x()) {
                x = xn;
                break;
            }
            lambda *= 0.5;
            if (bt == 39) throw OutOfChart("inversion left the chart ball");
        }
    }
    Vec r = rho0_grad(x) - ystar_ - y;
    if (r.norm() >= 1e-12 * grad_scale)
        throw NoConvergence("chart inversion Newton stalled");
    return x;
}

EmbeddingFields embed_graph(const GraphTorus& L) {
    const FiberChart& chart = *L.chart;
    const TorusGrid& g = *L.grid;
    const int n = chart.dim();

    EmbeddingFields out;
    out.grid = L.grid;
    out.x.assign(n, Vec::Constant(g.size(), 0.0));
    out.disp.assign(n, Vec::Zero(g.size()));

    // dh on the grid (spectral)
    std::vector<Vec> dh(n);
    bool zero_h = L.h.cwiseAbs().maxCoeff() == 0.0;
    for (int i = 0; i < n; ++i) dh[i] = zero_h ? Vec::Zero(g.size()) : g.deriv(L.h, i);

    double worst = 0.0;
    Vec y(n), x = chart.xstar();
    for (int p = 0; p < g.size(); ++p) {
        if (zero_h) {
            for (int i = 0; i < n; ++i) out.x[i][p] = chart.xstar()[i];
            continue;
        }
        for (int i = 0; i < n; ++i) y[i] = dh[i][p];
        x = chart.x_of_y(y); // warm start via previous point is possible; exactness wins
        for (int i = 0; i < n; ++i) out.x[i][p] = x[i];
        worst = std::max(worst, (chart.rho0_grad(x) - chart.ystar() - y).norm());
    }
    out.newton_residual = worst;
    return out;
}

EmbeddingFields flow_embedding(const FlowField& flow, const EmbeddingFields& emb, double s,
                               const FlowOptions& opt) {
    if (flow.trivial() || s == 0.0) return emb;
    const TorusGrid& g = *emb.grid;
    const int n = flow.dim();
    EmbeddingFields out;
    out.grid = emb.grid;
    out.newton_residual = emb.newton_residual;
    out.x.assign(n, Vec::Zero(g.size()));
    out.disp.assign(n, Vec::Zero(g.size()));
    Vec z(2 * n);
    for (int p = 0; p < g.size(); ++p) {
        Vec th = g.theta_of(p);
        for (int i = 0; i < n; ++i) {
            z[i] = emb.x[i][p];
            z[n + i] = th[i] + emb.disp[i][p];
        }
        FlowResult fr = flow_point(flow, z, 0.0, s, opt);
        for (int i = 0; i < n; ++i) {
            out.x[i][p] = fr.point[i];
            out.disp[i][p] = fr.point[n + i] - th[i];
        }
    }
    return out;
}

GeometrySample build_sample(const AmbientMetric& amb, const EmbeddingFields& emb,
                            bool need_ricci) {
    const TorusGrid& g = *emb.grid;
    const int n = amb.dim();
    const int P = g.size();
    const Mat Jmat = complex_structure_matrix(n);

    GeometrySample s;
    s.grid = emb.grid;
    s.n = n;
    s.emb = emb;
    s.has_ricci = need_ricci;

    // tangent frames and second derivatives by spectral differentiation of
    // the embedding fields
    std::vector<std::vector<Vec>> dx(n, std::vector<Vec>(n)), dd(n * n);
    std::vector<std::vector<Vec>> ddisp(n, std::vector<Vec>(n));
    std::vector<std::vector<Vec>> d2x(n, std::vector<Vec>(n * n)), d2disp(n, std::vector<Vec>(n * n));
    bool constant_fields = true;
    for (int c = 0; c < n; ++c) {
        if (emb.x[c].size() && emb.x[c].maxCoeff() != emb.x[c].minCoeff()) constant_fields = false;
        if (emb.disp[c].cwiseAbs().maxCoeff() != 0.0) constant_fields = false;
    }
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) {
            dx[c][i] = constant_fields ? Vec::Zero(P) : g.deriv(emb.x[c], i);
            ddisp[c][i] = constant_fields ? Vec::Zero(P) : g.deriv(emb.disp[c], i);
            for (int j = 0; j <= i; ++j) {
                Vec d2xf = constant_fields ? Vec::Zero(P) : g.deriv(dx[c][i], j);
                Vec d2df = constant_fields ? Vec::Zero(P) : g.deriv(ddisp[c][i], j);
                d2x[c][i * n + j] = d2xf;
                d2x[c][j * n + i] = d2xf;
                d2disp[c][i * n + j] = d2df;
                d2disp[c][j * n + i] = d2df;
            }
        }
    }

    s.gL.resize(P);
    s.gLinv.resize(P);
    s.W = Vec(P);
    s.a.resize(P);
    s.E.resize(P);
    s.Gamb.resize(P);
    s.Gambinv.resize(P);
    s.Omega.resize(P);
    if (need_ricci) s.Ricci.resize(P);
    s.alpha.assign(n, Vec(P));
    s.alpha_H.assign(n, Vec(P));

    Vec x(n), th(n);
    for (int p = 0; p < P; ++p) {
        Vec tgrid = g.theta_of(p);
        for (int i = 0; i < n; ++i) {
            x[i] = emb.x[i][p];
            th[i] = tgrid[i] + emb.disp[i][p];
        }
        AmbientJets aj = amb.eval(x, th, true, need_ricci);

        Mat E(2 * n, n);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < n; ++c) {
                E(c, i) = dx[c][i][p];
                E(n + c, i) = ddisp[c][i][p] + (c == i ? 1.0 : 0.0);
            }
        }
        s.E[p] = E;
        s.Gamb[p] = aj.G;
        s.Gambinv[p] = aj.Ginv;
        s.Omega[p] = aj.Omega;
        if (need_ricci) s.Ricci[p] = aj.Ricci;

        Mat gL = E.transpose() * aj.G * E;
        s.gL[p] = 0.5 * (gL + gL.transpose());
        double det = s.gL[p].determinant();
        if (!(det > 0.0)) throw DegenerateMetric("induced metric degenerate");
        s.gLinv[p] = s.gL[p].inverse();
        s.W[p] = std::sqrt(det);

        // Lagrangian defect: pullback of omega
        Mat pb = E.transpose() * aj.Omega * E;
        s.lagrangian_defect = std::max(s.lagrangian_defect, pb.cwiseAbs().maxCoeff());

        // nabla_{E_i} E_j = d2 xi + Gamma(E_i, E_j), then
        // a_{ijk} = G(nabla_{E_i} E_j, J E_k)
        std::vector<Vec> cov(n * n, Vec(2 * n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                Vec v(2 * n);
                for (int c = 0; c < n; ++c) {
                    v[c] = d2x[c][i * n + j][p];
                    v[n + c] = d2disp[c][i * n + j][p];
                }
                for (int a2 = 0; a2 < 2 * n; ++a2)
                    v[a2] += E.col(i).dot(aj.Gamma[a2] * E.col(j));
                cov[i * n + j] = v;
                cov[j * n + i] = v;
            }
        Mat JE = Jmat * E;
        std::vector<Mat>& ap = s.a[p];
        ap.assign(n, Mat(n, n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) ap[i](j, k) = cov[i * n + j].dot(aj.G * JE.col(k));
        // (store as a[p][i](j,k) with the first slot i)

        // total symmetry defect
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double v = ap[i](j, k);
                    s.symmetry_defect = std::max(s.symmetry_defect, std::abs(v - ap[j](i, k)));
                    s.symmetry_defect = std::max(s.symmetry_defect, std::abs(v - ap[i](k, j)));
                }

        // alpha_i = a_{ijk} g^{jk}
        for (int i = 0; i < n; ++i) {
            double v = 0.0;
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) v += ap[i](j, k) * s.gLinv[p](j, k);
            s.alpha[i][p] = v;
        }

        // route 2: alpha(E_i) = omega(H, E_i), H the mean curvature vector
        Vec H = Vec::Zero(2 * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) H += s.gLinv[p](i, j) * cov[i * n + j];
        // subtract tangential part
        Vec lower = E.transpose() * (aj.G * H);
        Vec coef = s.gLinv[p] * lower;
        H -= E * coef;
        // alpha(E_i) = G(H, J E_i): the a-route pairing uses the conjugate of
        // the Darboux-positive Omega
        for (int i = 0; i < n; ++i) s.alpha_H[i][p] = -H.dot(aj.Omega * E.col(i));
    }

    for (int i = 0; i < n; ++i)
        s.alpha_route_defect =
            std::max(s.alpha_route_defect, (s.alpha[i] - s.alpha_H[i]).cwiseAbs().maxCoeff());
    s.volume = g.integrate(s.W);
    return s;
}

double GeometrySample::sup_alpha_norm() const {
    double worst = 0.0;
    for (int p = 0; p < W.size(); ++p) {
        double v = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v += gLinv[p](i, j) * alpha[i][p] * alpha[j][p];
        worst = std::max(worst, std::sqrt(std::max(v, 0.0)));
    }
    return worst;
}

Vec codifferential(const GeometrySample& s, const OneForm& beta) {
    const TorusGrid& g = *s.grid;
    Vec acc = Vec::Zero(g.size());
    for (int i = 0; i < s.n; ++i) {
        Vec q(g.size());
        for (int p = 0; p < g.size(); ++p) {
            double v = 0.0;
            for (int j = 0; j < s.n; ++j) v += s.gLinv[p](i, j) * beta[j][p];
            q[p] = s.W[p] * v;
        }
        acc += g.deriv(q, i);
    }
    return -acc.cwiseQuotient(s.W);
}

OneForm differential(const GeometrySample& s, const Vec& f) {
    OneForm out(s.n);
    for (int i = 0; i < s.n; ++i) out[i] = s.grid->deriv(f, i);
    return out;
}

Vec scalar_product_field(const GeometrySample& s, const OneForm& u, const OneForm& v) {
    Vec out = Vec::Zero(s.grid->size());
    for (int p = 0; p < out.size(); ++p)
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j) out[p] += s.gLinv[p](i, j) * u[i][p] * v[j][p];
    return out;
}

double l2_inner(const GeometrySample& s, const Vec& u, const Vec& v) {
    return s.grid->integrate(u.cwiseProduct(v), s.W);
}

double l2_inner(const GeometrySample& s, const OneForm& u, const OneForm& v) {
    return s.grid->integrate(scalar_product_field(s, u, v), s.W);
}

double sup_norm(const GeometrySample& s, const OneForm& u) {
    double worst = 0.0;
    Vec sq = scalar_product_field(s, u, u);
    for (int p = 0; p < sq.size(); ++p) worst = std::max(worst, std::sqrt(std::max(sq[p], 0.0)));
    return worst;
}

std::vector<Vec> exterior_derivative(const GeometrySample& s, const OneForm& beta) {
    std::vector<Vec> out;
    for (int i = 0; i < s.n; ++i)
        for (int j = i + 1; j < s.n; ++j)
            out.push_back(s.grid->deriv(beta[j], i) - s.grid->deriv(beta[i], j));
    return out;
}

double dalpha_norm(const GeometrySample& s) {
    auto d = exterior_derivative(s, s.alpha);
    if (d.empty()) return 0.0;
    // L2 norm with metric weights: |dα|^2 = (1/2) dα_{ij} dα_{kl} g^{ik} g^{jl}
    double acc = 0.0;
    int idx = 0;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < s.n; ++i)
        for (int j = i + 1; j < s.n; ++j) pairs.emplace_back(i, j);
    Vec dens = Vec::Zero(s.grid->size());
    for (int p = 0; p < dens.size(); ++p) {
        for (size_t u = 0; u < pairs.size(); ++u)
            for (size_t v = 0; v < pairs.size(); ++v) {
                auto [i, j] = pairs[u];
                auto [k, l] = pairs[v];
                double gik = s.gLinv[p](i, k), gjl = s.gLinv[p](j, l);
                double gil = s.gLinv[p](i, l), gjk = s.gLinv[p](j, k);
                dens[p] += d[u][p] * d[v][p] * (gik * gjl - gil * gjk);
            }
    }
    (void)idx;
    acc = s.grid->integrate(dens, s.W);
    return std::sqrt(std::max(acc, 0.0));
}

Vec poisson_solve(const GeometrySample& s, const Vec& rhs, double tol, int maxit) {
    const TorusGrid& g = *s.grid;
    // mean induced metric for the constant-coefficient preconditioner
    Mat gbar = Mat::Zero(s.n, s.n);
    for (int p = 0; p < g.size(); ++p) gbar += s.gLinv[p];
    gbar /= double(g.size());

    auto wmean = [&](const Vec& f) { return g.integrate(f, s.W) / g.integrate(s.W); };
    auto A = [&](const Vec& phi) {
        Vec lap = codifferential(s, differential(s, phi));
        lap.array() -= wmean(lap); // project to the solvable subspace
        return lap;
    };
    auto M = [&](const Vec& r) {
        VecC c = g.to_coeff(r);
        const int N = g.modes(), P = g.pts_per_axis();
        for (int idx = 0; idx < g.size(); ++idx) {
            double q = 0.0;
            int rem = idx;
            Vec k(s.n);
            for (int a2 = 0; a2 < s.n; ++a2) {
                k[a2] = rem % P - N;
                rem /= P;
            }
            q = k.dot(gbar * k);
            c[idx] = (q > 0.0) ? c[idx] / q : 0.0;
        }
        return g.from_coeff(std::move(c));
    };
    std::function<double(const Vec&, const Vec&)> ip = [&](const Vec& u, const Vec& v) {
        return g.integrate(u.cwiseProduct(v), s.W);
    };
    Vec b = rhs;
    b.array() -= wmean(b);
    IterSolveResult res = pcg(A, b, M, tol, maxit, &ip);
    if (!res.converged && res.residual > std::sqrt(tol))
        throw PoissonNoConvergence("residual " + std::to_string(res.residual));
    Vec phi = res.x;
    phi.array() -= phi.mean();
    return phi;
}

std::vector<OneForm> harmonic_basis(const GeometrySample& s) {
    std::vector<OneForm> basis;
    for (int j = 0; j < s.n; ++j) {
        OneForm dtheta(s.n);
        for (int i = 0; i < s.n; ++i)
            dtheta[i] = Vec::Constant(s.grid->size(), i == j ? 1.0 : 0.0);
        Vec rhs = codifferential(s, dtheta);
        Vec chi = poisson_solve(s, -rhs);
        OneForm h = differential(s, chi);
        for (int i = 0; i < s.n; ++i) h[i] += dtheta[i];
        basis.push_back(std::move(h));
    }
    return basis;
}

const char* to_string(LagClass c) {
    switch (c) {
        case LagClass::Minimal: return "minimal";
        case LagClass::LMinimal: return "L-minimal";
        case LagClass::HMinimal: return "H-minimal";
        default: return "none";
    }
}

HodgeSplit hodge_decompose(const GeometrySample& s, const OneForm& alpha,
                           const HodgeOptions& opt) {
    HodgeSplit out;
    // exact part
    Vec dsa = codifferential(s, alpha);
    out.exact_potential = poisson_solve(s, dsa, opt.solve_tol);
    out.exact = differential(s, out.exact_potential);

    // harmonic part via Gram projection on the harmonic representatives
    auto basis = harmonic_basis(s);
    Mat Gram(s.n, s.n);
    Vec rhsv(s.n);
    for (int i = 0; i < s.n; ++i) {
        rhsv[i] = l2_inner(s, basis[i], alpha);
        for (int j = 0; j < s.n; ++j) Gram(i, j) = l2_inner(s, basis[i], basis[j]);
    }
    out.klass = Gram.ldlt().solve(rhsv);
    out.harmonic.assign(s.n, Vec::Zero(s.grid->size()));
    for (int j = 0; j < s.n; ++j)
        for (int i = 0; i < s.n; ++i) out.harmonic[i] += out.klass[j] * basis[j][i];

    out.coexact.resize(s.n);
    for (int i = 0; i < s.n; ++i) out.coexact[i] = alpha[i] - out.exact[i] - out.harmonic[i];

    // diagnostics
    OneForm recon(s.n);
    for (int i = 0; i < s.n; ++i) recon[i] = out.exact[i] + out.harmonic[i] + out.coexact[i] - alpha[i];
    out.reconstruction_error = sup_norm(s, recon);
    double o1 = std::abs(l2_inner(s, out.exact, out.harmonic));
    double o2 = std::abs(l2_inner(s, out.exact, out.coexact));
    double o3 = std::abs(l2_inner(s, out.harmonic, out.coexact));
    double scale = 1.0 + l2_inner(s, alpha, alpha);
    out.orthogonality_error = std::max({o1, o2, o3}) / scale;

    double sup_alpha = sup_norm(s, alpha);
    double sup_harm = sup_norm(s, out.harmonic);
    double sup_exact = sup_norm(s, out.exact);
    double sup_dstar = codifferential(s, alpha).cwiseAbs().maxCoeff();
    if (sup_alpha < opt.tol_minimal)
        out.classification = LagClass::Minimal;
    else if (sup_harm < opt.tol_h && sup_exact < opt.tol_h)
        out.classification = LagClass::LMinimal;
    else if (sup_dstar < opt.tol_h)
        out.classification = LagClass::HMinimal;
    else
        out.classification = LagClass::None;
    return out;
}

double first_variation(const GeometrySample& s, const OneForm& beta) {
    return -l2_inner(s, const_cast<const OneForm&>(s.alpha), beta);
}

namespace {

// ambient vector V_beta = g^{jk} beta_k E_j per grid point
std::vector<Vec> raise_to_ambient(const GeometrySample& s, const OneForm& beta) {
    std::vector<Vec> out(s.grid->size());
    for (int p = 0; p < s.grid->size(); ++p) {
        Vec coef(s.n);
        for (int j = 0; j < s.n; ++j) {
            double v = 0.0;
            for (int k = 0; k < s.n; ++k) v += s.gLinv[p](j, k) * beta[k][p];
            coef[j] = v;
        }
        out[p] = s.E[p] * coef;
    }
    return out;
}

OneForm iota_ricci(const GeometrySample& s, const OneForm& beta,
                   std::optional<double> ricci_lambda) {
    auto V = raise_to_ambient(s, beta);
    OneForm out(s.n, Vec(s.grid->size()));
    for (int p = 0; p < s.grid->size(); ++p) {
        Mat R = ricci_lambda ? Mat(*ricci_lambda * s.Gamb[p]) : s.Ricci[p];
        for (int i = 0; i < s.n; ++i) out[i][p] = V[p].dot(R * s.E[p].col(i));
    }
    return out;
}

} // namespace

OneForm alpha_dot(const GeometrySample& s, const OneForm& beta,
                  std::optional<double> ricci_lambda) {
    if (!ricci_lambda && !s.has_ricci) throw Error("alpha_dot requires ambient Ricci");
    Vec dsb = codifferential(s, beta);
    OneForm out = differential(s, dsb);
    OneForm ric = iota_ricci(s, beta, ricci_lambda);
    for (int i = 0; i < s.n; ++i) out[i] -= ric[i];
    return out;
}

Vec d_operator(const GeometrySample& s, const OneForm& beta,
               std::optional<double> ricci_lambda) {
    if (!ricci_lambda && !s.has_ricci) throw Error("D_operator requires ambient Ricci");
    const TorusGrid& g = *s.grid;

    // d* d d* beta
    Vec dsb = codifferential(s, beta);
    Vec term1 = codifferential(s, differential(s, dsb));

    // -d*(iota(V_beta) Ric)
    OneForm ric = iota_ricci(s, beta, ricci_lambda);
    Vec term2 = -codifferential(s, ric);

    // -V_alpha(g(alpha, beta))
    Vec pfield = scalar_product_field(s, s.alpha, beta);
    OneForm dp = differential(s, pfield);
    Vec term3 = Vec::Zero(g.size());
    for (int p = 0; p < g.size(); ++p)
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j)
                term3[p] -= s.gLinv[p](i, j) * s.alpha[j][p] * dp[i][p];

    // +2 (a^{ijk} alpha_j beta_k)_{;i} = +2 (1/W) d_i (W T^i),
    // with T^i = g^{ia} a_{abc} (g^{-1} alpha)^b (g^{-1} beta)^c
    Vec term4;
    {
        std::vector<Vec> T(s.n, Vec(g.size()));
        Vec al(s.n), be(s.n);
        for (int p = 0; p < g.size(); ++p) {
            for (int i = 0; i < s.n; ++i) {
                al[i] = s.alpha[i][p];
                be[i] = beta[i][p];
            }
            Vec ar = s.gLinv[p] * al, br = s.gLinv[p] * be;
            Vec tmp(s.n);
            for (int a2 = 0; a2 < s.n; ++a2) tmp[a2] = ar.dot(s.a[p][a2] * br);
            Vec Ti = s.gLinv[p] * tmp;
            for (int i = 0; i < s.n; ++i) T[i][p] = Ti[i];
        }
        Vec acc = Vec::Zero(g.size());
        for (int i = 0; i < s.n; ++i) acc += g.deriv(Vec(s.W.cwiseProduct(T[i])), i);
        term4 = 2.0 * acc.cwiseQuotient(s.W);
    }

    return term1 + term2 + term3 + term4;
}

OneForm pullback_iota_omega(const GeometrySample& s, int ambient_axis) {
    OneForm out(s.n, Vec(s.grid->size()));
    for (int p = 0; p < s.grid->size(); ++p) {
        Vec e = Vec::Zero(2 * s.n);
        e[ambient_axis] = 1.0;
        for (int i = 0; i < s.n; ++i) out[i][p] = e.dot(s.Omega[p] * s.E[p].col(i));
    }
    return out;
}

} // namespace hml
