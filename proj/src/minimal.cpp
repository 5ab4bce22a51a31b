#include "hml/minimal.hpp"

namespace hml {

Jet VolumeProfile::rho0_jet(const Vec& x, int order) const {
    const int n = base_->dim();
    auto sp = JetSpace::get(2 * n, order);
    Jet j(sp);
    base_->add_to_jet(j, x, scale_);
    if (f0_) f0_->add_to_jet(j, x, Vec::Zero(n), scale_);
    return j;
}

Mat VolumeProfile::hess_rho0(const Vec& x) const {
    const int n = base_->dim();
    Jet j = rho0_jet(x, 2);
    Mat H(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            std::vector<int> e(2 * n, 0);
            e[a] += 1;
            e[b] += 1;
            H(a, b) = j.deriv(e);
        }
    return H;
}

double VolumeProfile::value(const Vec& x) const {
    const int n = base_->dim();
    Mat H = hess_rho0(x);
    double det = H.determinant();
    if (!(det > 0.0)) throw NotConvex("Hess rho0 not positive definite");
    return 0.5 * std::log(det) + n * std::log(kTwoPi) + 0.5 * n * std::log(2.0);
}

Vec VolumeProfile::gradient(const Vec& x) const {
    const int n = base_->dim();
    Jet j = rho0_jet(x, 3);
    Mat H(n, n);
    std::vector<Mat> dH(n, Mat(n, n));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            std::vector<int> e(2 * n, 0);
            e[a] += 1;
            e[b] += 1;
            H(a, b) = j.deriv(e);
            for (int c = 0; c < n; ++c) {
                std::vector<int> e3 = e;
                e3[c] += 1;
                dH[c](a, b) = j.deriv(e3);
            }
        }
    Mat Hinv = H.inverse();
    Vec g(n);
    for (int c = 0; c < n; ++c) g[c] = 0.5 * (Hinv * dH[c]).trace();
    return g;
}

Mat VolumeProfile::hessian(const Vec& x) const {
    const int n = base_->dim();
    Jet j = rho0_jet(x, 4);
    Mat H(n, n);
    std::vector<Mat> dH(n, Mat(n, n));
    std::vector<Mat> ddH(n * n, Mat(n, n));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            std::vector<int> e(2 * n, 0);
            e[a] += 1;
            e[b] += 1;
            H(a, b) = j.deriv(e);
            for (int c = 0; c < n; ++c) {
                std::vector<int> e3 = e;
                e3[c] += 1;
                dH[c](a, b) = j.deriv(e3);
                for (int d = 0; d < n; ++d) {
                    std::vector<int> e4 = e3;
                    e4[d] += 1;
                    ddH[c * n + d](a, b) = j.deriv(e4);
                }
            }
        }
    Mat Hinv = H.inverse();
    Mat out(n, n);
    for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
            out(c, d) = 0.5 * ((Hinv * ddH[c * n + d]).trace() -
                               (Hinv * dH[c] * Hinv * dH[d]).trace());
    return out;
}

double VolumeProfile::value_by_quadrature(const Vec& x, int N) const {
    // direct fiber volume through the full geometry stack
    const int n = base_->dim();
    FiberChart chart(base_, f0_, scale_, x, 0.0);
    auto grid = std::make_shared<TorusGrid>(n, N);
    GraphTorus L;
    L.chart = &chart;
    L.grid = grid;
    L.h = Vec::Zero(grid->size());
    EmbeddingFields emb = embed_graph(L);
    AmbientMetric amb(base_, f0_, nullptr, 0.0, scale_);
    GeometrySample smp = build_sample(amb, emb, false);
    return std::log(smp.volume);
}

MinimizeResult minimize_volume(const VolumeProfile& u, double region_c, int boundary_samples) {
    const BasePotential& base = u.base();
    const int n = base.dim();
    MinimizeResult out;

    Vec x = Vec::Zero(n);
    if (!base.inside(x, region_c))
        throw ExitedRegion("origin not inside the working region; recenter the fan first");

    bool converged = false;
    int it = 0;
    for (; it < 100; ++it) {
        Vec g = u.gradient(x);
        Mat H = u.hessian(x);
        Eigen::SelfAdjointEigenSolver<Mat> es(H);
        double lmin = es.eigenvalues().minCoeff();
        if (lmin < -1e-10) throw NotConvex("Hess u has a negative eigenvalue");
        if (g.norm() < 1e-10) {
            converged = true;
            break;
        }
        if (lmin < 1e-12)
            throw NoMinimum("Hess u vanishes while the gradient does not (flat direction)");
        Vec step = H.ldlt().solve(-g);
        double lambda = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vec xn = x + lambda * step;
            if (base.inside(xn, region_c) && u.gradient(xn).norm() < g.norm()) {
                x = xn;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!moved) throw NoMinimum("descent blocked before reaching a critical point");
    }
    if (!converged) throw NoConvergence("volume minimization exceeded 100 iterations");

    out.x0 = x;
    out.u_min = u.value(x);
    out.iterations = it;

    // boundary gap: ray-march from the minimizer to the boundary of
    // Delta_{c tau} in deterministic directions
    double gap = std::numeric_limits<double>::infinity();
    Rng rng(1357);
    int samples = std::max(boundary_samples, 2 * n);
    for (int k = 0; k < samples; ++k) {
        Vec d(n);
        if (n == 1) {
            d[0] = (k % 2 == 0) ? 1.0 : -1.0;
        } else {
            for (int i = 0; i < n; ++i) d[i] = rng.uniform(-1.0, 1.0);
            if (d.norm() == 0.0) continue;
            d /= d.norm();
        }
        double lo = 0.0, hi = 1.0;
        while (base.inside(x + hi * d, region_c) && hi < 1e6) hi *= 2.0;
        for (int b = 0; b < 200; ++b) {
            double mid = 0.5 * (lo + hi);
            (base.inside(x + mid * d, region_c) ? lo : hi) = mid;
        }
        Vec xb = x + lo * d * (1.0 - 1e-9);
        gap = std::min(gap, u.value(xb) - out.u_min);
    }
    out.boundary_gap = gap;
    out.gap_at_least_one = gap >= 1.0;
    return out;
}

const PipelineContext::Solved& PipelineContext::solve_fiber(const Vec& x) {
    std::vector<double> key(x.data(), x.data() + x.size());
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    FiberChart chart(base_, f0_, tau() * tau(), x, region_c_);
    FiberProblem prob(&chart, &flow_, grid_, cfg_);

    Solved sol;
    bool warm_done = false;
    if (have_warm_ && (warm_x_ - x).norm() < 0.2 * chart.chart_radius_x()) {
        // try a direct solve at s = 1 from the neighboring solution
        try {
            ContinuationState st = prob.newton_solve(1.0, warm_h_);
            st.s = 1.0;
            sol.state = std::move(st);
            warm_done = true;
        } catch (const Error&) {
            warm_done = false;
        }
    }
    if (!warm_done) sol.state = prob.continue_path();
    sol.sample = prob.sample(sol.state.h, 1.0);
    have_warm_ = true;
    warm_h_ = sol.state.h;
    warm_x_ = x;
    auto res = cache_.emplace(std::move(key), std::move(sol));
    return res.first->second;
}

CohomologyPoint PipelineContext::psi(const Vec& x) {
    const Solved& sol = solve_fiber(x);
    HodgeSplit split = hodge_decompose(sol.sample, sol.sample.alpha);
    CohomologyPoint out;
    out.x = x;
    out.klass = split.klass;
    out.dalpha = dalpha_norm(sol.sample);
    out.residual = sol.state.residual_norm;
    out.h_norm = sol.state.h.cwiseAbs().maxCoeff();
    return out;
}

DPsiCheck dpsi_check(PipelineContext& ctx, const Vec& x, double fd_step,
                     std::optional<double> ricci_lambda) {
    const int n = static_cast<int>(x.size());
    DPsiCheck out;
    const auto& sol = ctx.solve_fiber(x);
    const GeometrySample& smp = sol.sample;

    // formula route: columns are harmonic classes of -iota(V_beta) Ric for
    // the harmonic basis classes beta (whose own class coordinates are e_j)
    auto basis = harmonic_basis(smp);
    out.formula = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        OneForm ad = alpha_dot(smp, basis[j], ricci_lambda);
        // [alpha_dot] = -[iota(V) Ric]; the dd* part is exact
        HodgeSplit sp = hodge_decompose(smp, ad);
        out.formula.col(j) = sp.klass;
    }

    // finite-difference route across neighboring solved fibers, converted to
    // class coordinates through the chart Hessian (the moduli velocity of
    // base translation)
    FiberChart chart(&ctx.base(), ctx.f0(), ctx.tau() * ctx.tau(), x, ctx.region_c());
    Mat C = chart.hess_star();
    Mat dpsi_dx(n, n);
    for (int j = 0; j < n; ++j) {
        Vec xp = x, xm = x;
        xp[j] += fd_step;
        xm[j] -= fd_step;
        Vec pp = ctx.psi(xp).klass, pm = ctx.psi(xm).klass;
        dpsi_dx.col(j) = (pp - pm) / (2.0 * fd_step);
    }
    out.fd = dpsi_dx * C.inverse();
    Eigen::JacobiSVD<Mat> svd(out.formula - out.fd);
    out.difference = svd.singularValues().maxCoeff();
    return out;
}

MinimalTorusReport find_minimal(PipelineContext& ctx, const FindMinimalOptions& opt) {
    MinimalTorusReport rep;

    VolumeProfile u(&ctx.base(), ctx.f0(), ctx.tau() * ctx.tau());
    MinimizeResult mz = minimize_volume(u, ctx.region_c());
    rep.x0 = mz.x0;
    rep.boundary_gap = mz.boundary_gap;

    Vec x = mz.x0;
    rep.iterates.push_back(x);
    for (int it = 0; it < opt.max_iterations; ++it) {
        CohomologyPoint cp = ctx.psi(x);
        rep.psi_norm = cp.klass.norm();
        rep.iterations = it;
        if (rep.psi_norm < opt.psi_tol) {
            rep.x1 = x;
            const auto& sol = ctx.solve_fiber(x);
            HodgeSplit split = hodge_decompose(sol.sample, sol.sample.alpha);
            rep.sup_alpha = sol.sample.sup_alpha_norm();
            rep.dstar_alpha = codifferential(sol.sample, sol.sample.alpha).cwiseAbs().maxCoeff();
            rep.dalpha = dalpha_norm(sol.sample);
            rep.class_norm = split.klass.norm();
            rep.h_norm = sol.state.h.cwiseAbs().maxCoeff();
            rep.classification = split.classification;
            rep.interior_margin = ctx.base().boundary_distance(x, ctx.region_c());
            rep.status = (split.classification == LagClass::Minimal)
                             ? MinimalStatus::Minimal
                             : MinimalStatus::NotMinimalAtRoot;
            return rep;
        }
        // Jacobian: dPsi/dx = (formula-route class map) * chart Hessian
        DPsiCheck dc = dpsi_check(ctx, x, opt.fd_step);
        FiberChart chart(&ctx.base(), ctx.f0(), ctx.tau() * ctx.tau(), x, ctx.region_c());
        Mat J = dc.formula * chart.hess_star();
        Vec step = J.fullPivLu().solve(-cp.klass);
        // damped update, stay in the region
        double lambda = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
            Vec xn = x + lambda * step;
            if (ctx.base().inside(xn, ctx.region_c())) {
                try {
                    double nn = ctx.psi(xn).klass.norm();
                    if (nn < rep.psi_norm || nn < opt.psi_tol) {
                        x = xn;
                        moved = true;
                        break;
                    }
                } catch (const Error&) {
                }
            }
            lambda *= 0.5;
        }
        if (!moved) {
            rep.status = MinimalStatus::RootNotFound;
            rep.x1 = x;
            return rep;
        }
        rep.iterates.push_back(x);
        if (!ctx.base().inside(x, ctx.region_c())) {
            rep.status = MinimalStatus::ExitedRegion;
            rep.x1 = x;
            return rep;
        }
    }
    rep.status = MinimalStatus::RootNotFound;
    rep.x1 = x;
    return rep;
}

} // namespace hml
