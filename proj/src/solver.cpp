#include "hml/solver.hpp"

namespace hml {

FiberProblem::FiberProblem(const FiberChart* chart, const FlowField* flow,
                           std::shared_ptr<const TorusGrid> grid, SolverConfig cfg)
    : chart_(chart), flow_(flow), grid_(std::move(grid)), basis_(*grid_), cfg_(std::move(cfg)) {}

GeometrySample FiberProblem::sample(const Vec& h_grid, double s, bool need_ricci) const {
    GraphTorus L;
    L.chart = chart_;
    L.grid = grid_;
    L.h = h_grid;
    L.enforce_mean_zero();
    EmbeddingFields emb = embed_graph(L);
    FlowOptions fopt;
    fopt.tol = cfg_.ode_tol;
    fopt.region_c = 0.0; // the chart radius already guards the region
    EmbeddingFields flowed = flow_embedding(*flow_, emb, s, fopt);
    AmbientMetric amb = flow_->metric_at(s);
    return build_sample(amb, flowed, need_ricci);
}

Vec FiberProblem::residual(const Vec& h_grid, double s) const {
    GeometrySample smp = sample(h_grid, s);
    return residual_field(smp);
}

Vec FiberProblem::linearize_apply(const GeometrySample& smp, const Vec& dh_grid) const {
    OneForm ddh = differential(smp, dh_grid);
    return d_operator(smp, ddh);
}

double FiberProblem::bilaplacian_deviation() const {
    GeometrySample smp = sample(Vec::Zero(grid_->size()), 0.0);
    // constant fiber metric of the toric sample
    Mat g0 = smp.gL[0];
    Mat g0inv = g0.inverse();
    double worst = 0.0;
    for (int trial = 0; trial < std::min(6, basis_.size()); ++trial) {
        Vec coeff = Vec::Zero(basis_.size());
        int m = trial;
        coeff[m] = 1.0;
        Vec dh = basis_.to_field(coeff);
        Vec lin = linearize_apply(smp, dh);
        // flat bilaplacian: modes scale by q(k)^2, q(k) = k g0^{-1} k
        Vec a = basis_.from_field(dh);
        Vec expect_coeff = Vec::Zero(basis_.size());
        for (int i = 0; i < basis_.size(); ++i)
            expect_coeff[i] = a[i] * sqr(basis_.quad_form(i, g0inv));
        Vec expect = basis_.to_field(expect_coeff);
        double denom = std::max(1.0, expect.cwiseAbs().maxCoeff());
        worst = std::max(worst, (lin - expect).cwiseAbs().maxCoeff() / denom);
    }
    return worst;
}

Vec FiberProblem::solve_linear(const GeometrySample& smp, const Vec& rhs_field,
                               double* inv_norm) const {
    // mean fiber metric for the bilaplacian preconditioner
    Mat gbar = Mat::Zero(smp.n, smp.n);
    for (int p = 0; p < grid_->size(); ++p) gbar += smp.gLinv[p];
    gbar /= double(grid_->size());

    Vec b = basis_.from_field(rhs_field);
    LinOp A = [&](const Vec& c) {
        Vec field = basis_.to_field(c);
        Vec out = linearize_apply(smp, field);
        return basis_.from_field(out);
    };
    LinOp M = [&](const Vec& r) {
        Vec out(r.size());
        for (int i = 0; i < r.size(); ++i) {
            double q = basis_.quad_form(i, gbar);
            out[i] = r[i] / std::max(q * q, 1e-8);
        }
        return out;
    };
    IterSolveResult res = gmres(A, b, M, cfg_.linear_tol, cfg_.linear_maxit);
    if (!res.converged && res.residual > 1e-6)
        throw LinearSolveStagnation("gmres residual " + std::to_string(res.residual));
    if (inv_norm) *inv_norm = b.norm() > 0 ? res.x.norm() / b.norm() : 0.0;
    return basis_.to_field(res.x);
}

Mat FiberProblem::dense_linearization(const GeometrySample& smp) const {
    const int dim = basis_.size();
    Mat M(dim, dim);
    for (int j = 0; j < dim; ++j) {
        Vec e = Vec::Zero(dim);
        e[j] = 1.0;
        M.col(j) = basis_.from_field(linearize_apply(smp, basis_.to_field(e)));
    }
    return M;
}

ContinuationState FiberProblem::newton_solve(double s, const Vec& h_init,
                                             std::vector<double>* history) const {
    ContinuationState st;
    st.s = s;
    st.h = h_init;
    st.h.array() -= st.h.mean();

    GeometrySample smp = sample(st.h, s);
    Vec r = residual_field(smp);
    st.residual_norm = r.cwiseAbs().maxCoeff();
    if (history) history->push_back(st.residual_norm);

    for (int it = 0; it < cfg_.max_newton; ++it) {
        if (st.residual_norm < cfg_.newton_tol) return st;
        Vec dh = solve_linear(smp, -r, nullptr);
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 8; ++bt) {
            Vec h_try = st.h + lambda * dh;
            h_try.array() -= h_try.mean();
            try {
                GeometrySample smp_try = sample(h_try, s);
                Vec r_try = residual_field(smp_try);
                double nrm = r_try.cwiseAbs().maxCoeff();
                if (nrm < st.residual_norm * (1.0 - 0.25 * lambda) || nrm < cfg_.newton_tol) {
                    st.h = h_try;
                    smp = std::move(smp_try);
                    r = std::move(r_try);
                    st.residual_norm = nrm;
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
                // step left the chart or degenerated; damp harder
            }
            lambda *= 0.5;
        }
        if (history) history->push_back(st.residual_norm);
        if (!accepted) throw MaxIterations("newton stalled at residual " +
                                           std::to_string(st.residual_norm));
    }
    if (st.residual_norm >= cfg_.newton_tol)
        throw MaxIterations("newton used all iterations, residual " +
                            std::to_string(st.residual_norm));
    return st;
}

ContinuationState FiberProblem::continue_path() const {
    ContinuationState st;
    st.h = Vec::Zero(grid_->size());
    st.s = 0.0;

    // stage 0 consistency: Phi(0, 0) vanishes for toric fibers
    {
        GeometrySample smp = sample(st.h, 0.0);
        st.residual_norm = residual_field(smp).cwiseAbs().maxCoeff();
    }

    double step = 1.0 / cfg_.stages;
    while (st.s < 1.0 - 1e-14) {
        double target = std::min(1.0, st.s + step);
        StageRecord rec;
        rec.s = target;
        rec.step = target - st.s;
        try {
            std::vector<double> hist;
            GeometrySample smp0 = sample(st.h, target);
            rec.residual_before = residual_field(smp0).cwiseAbs().maxCoeff();
            ContinuationState sub = newton_solve(target, st.h, &hist);
            rec.newton_iters = static_cast<int>(hist.size()) - 1;
            rec.residual_after = sub.residual_norm;
            rec.accepted = true;
            if (cfg_.collect_guards) {
                GeometrySample smp = sample(sub.h, target);
                if (basis_.size() <= cfg_.dense_guard_dim) {
                    Mat M = dense_linearization(smp);
                    Eigen::JacobiSVD<Mat> svd(M);
                    double smin = svd.singularValues().minCoeff();
                    rec.inverse_norm = smin > 0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
                } else {
                    // probe estimate: ||Lin^{-1} b|| / ||b|| for a fixed direction
                    Rng prng(91);
                    Vec b = Vec::Zero(basis_.size());
                    for (int i = 0; i < basis_.size(); ++i) b[i] = prng.uniform(-1.0, 1.0);
                    double inv = 0.0;
                    solve_linear(smp, basis_.to_field(b), &inv);
                    rec.inverse_norm = inv;
                }
                // Lipschitz proxy: difference quotient of linearizations
                Rng rng(4242);
                Vec probe = Vec::Zero(basis_.size()), dir = Vec::Zero(basis_.size());
                for (int i = 0; i < basis_.size(); ++i) {
                    probe[i] = rng.uniform(-1.0, 1.0);
                    dir[i] = rng.uniform(-1.0, 1.0);
                }
                probe /= probe.norm();
                dir /= dir.norm();
                double eps = 1e-4;
                Vec h_pert = sub.h + eps * basis_.to_field(dir);
                h_pert.array() -= h_pert.mean();
                GeometrySample smp_p = sample(h_pert, target);
                Vec l1 = linearize_apply(smp, basis_.to_field(probe));
                Vec l2 = linearize_apply(smp_p, basis_.to_field(probe));
                rec.lipschitz = (l2 - l1).cwiseAbs().maxCoeff() / eps;
            }
            st.h = sub.h;
            st.s = target;
            st.residual_norm = sub.residual_norm;
            st.newton_history = sub.newton_history;
            st.records.push_back(rec);
        } catch (const Error& e) {
            rec.accepted = false;
            st.records.push_back(rec);
            step *= 0.5;
            if (step < cfg_.min_step)
                throw StepUnderflow("continuation stalled at s = " + std::to_string(st.s) +
                                    " (" + e.what() + ")");
        }
    }
    return st;
}

double nondegeneracy_margin(const FiberProblem& prob, const GeometrySample& smp) {
    auto basis = harmonic_basis(smp);
    double margin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < smp.n; ++j) {
        // solve D(d phi) = -D(h_j) so that beta = h_j + d phi is a kernel
        // element with prescribed harmonic class
        Vec rhs = -d_operator(smp, basis[j]);
        Vec phi;
        try {
            // reuse the Newton linear solver machinery
            const ModeBasis& mb = prob.basis();
            Mat gbar = Mat::Zero(smp.n, smp.n);
            for (int p = 0; p < smp.grid->size(); ++p) gbar += smp.gLinv[p];
            gbar /= double(smp.grid->size());
            Vec b = mb.from_field(rhs);
            LinOp A = [&](const Vec& c) {
                return mb.from_field(prob.linearize_apply(smp, mb.to_field(c)));
            };
            LinOp M = [&](const Vec& r) {
                Vec out(r.size());
                for (int i = 0; i < r.size(); ++i) {
                    double q = mb.quad_form(i, gbar);
                    out[i] = r[i] / std::max(q * q, 1e-8);
                }
                return out;
            };
            IterSolveResult res = gmres(A, b, M, prob.config().linear_tol,
                                        prob.config().linear_maxit);
            phi = mb.to_field(res.x);
        } catch (const Error&) {
            phi = Vec::Zero(smp.grid->size());
        }
        OneForm beta = differential(smp, phi);
        for (int i = 0; i < smp.n; ++i) beta[i] += basis[j][i];
        // min over theta of the pointwise norm
        Vec sq = scalar_product_field(smp, beta, beta);
        margin = std::min(margin, std::sqrt(std::max(sq.minCoeff(), 0.0)));
    }
    return margin;
}

FibrationResult sweep_fibration(const BasePotential& base, const FieldPtr& f0,
                                const FieldPtr& f1, double region_c,
                                const std::vector<Vec>& base_points, int N,
                                const SolverConfig& cfg) {
    FibrationResult out;
    const double tau = base.tau();
    FlowField flow(&base, f0, f1);
    auto grid = std::make_shared<TorusGrid>(base.dim(), N);

    for (const Vec& x : base_points) {
        FibrationPoint pt;
        pt.x = x;
        try {
            if (!base.inside(x, region_c))
                throw LeftRegion("base point outside the region");
            FiberChart chart(&base, f0, tau * tau, x, region_c);
            FiberProblem prob(&chart, &flow, grid, cfg);
            ContinuationState st = prob.continue_path();
            pt.state = st;
            pt.h_norm = st.h.cwiseAbs().maxCoeff();
            pt.residual = st.residual_norm;
            GeometrySample smp = prob.sample(st.h, 1.0);
            HodgeSplit split = hodge_decompose(smp, smp.alpha);
            pt.alpha_class = split.klass;
            pt.margin = nondegeneracy_margin(prob, smp);
            GeometrySample toric = prob.sample(Vec::Zero(grid->size()), 0.0);
            pt.toric_margin = nondegeneracy_margin(prob, toric);
            pt.ok = true;
        } catch (const Error& e) {
            pt.ok = false;
            pt.error = e.what();
            out.all_ok = false;
        }
        out.points.push_back(std::move(pt));
    }
    return out;
}

} // namespace hml
