#include "hml/kahler.hpp"

namespace hml {

Mat complex_structure_matrix(int n) {
    Mat J = Mat::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        J(j, n + j) = -2.0;     // J(dtheta-component) -> x-component
        J(n + j, j) = 0.5;      // J(dx-component) -> theta-component
    }
    return J;
}

Jet AmbientMetric::potential_jet(const Vec& x, const Vec& th, int order) const {
    const int n = dim();
    Jet out(JetSpace::get(2 * n, order));
    base_->add_to_jet(out, x, scale_);
    if (f0_) f0_->add_to_jet(out, x, th, scale_);
    if (f1_ && s_ != 0.0) f1_->add_to_jet(out, x, th, scale_ * s_);
    return out;
}

namespace {

// derivative lookup helpers on the 2n-variable potential jet
double d2(const Jet& j, int a, int b) {
    std::vector<int> g(j.space().dim(), 0);
    g[a] += 1;
    g[b] += 1;
    return j.deriv(g);
}
double d3(const Jet& j, int a, int b, int c) {
    std::vector<int> g(j.space().dim(), 0);
    g[a] += 1;
    g[b] += 1;
    g[c] += 1;
    return j.deriv(g);
}

// determinant of a matrix of jets by Gaussian elimination
Jet jet_det(std::vector<std::vector<Jet>>& M) {
    const int n = static_cast<int>(M.size());
    Jet det = Jet::constant(M[0][0].space_ptr(), 1.0);
    double sign = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(M[r][col].value()) > std::abs(M[piv][col].value())) piv = r;
        if (piv != col) {
            std::swap(M[piv], M[col]);
            sign = -sign;
        }
        if (M[col][col].value() == 0.0) throw DegenerateMetric("singular complex Hessian");
        det = det * M[col][col];
        Jet pivinv = inv(M[col][col]);
        for (int r = col + 1; r < n; ++r) {
            Jet f = M[r][col] * pivinv;
            for (int c = col; c < n; ++c) M[r][c] -= f * M[col][c];
        }
    }
    return det * sign;
}

} // namespace

AmbientJets AmbientMetric::eval(const Vec& x, const Vec& th, bool need_gamma,
                                bool need_ricci) const {
    const int n = dim();
    const int order = need_ricci ? 4 : (need_gamma ? 3 : 2);
    Jet phi = potential_jet(x, th, order);

    AmbientJets out;
    out.n = n;
    out.x = x;
    out.th = th;
    out.A = Mat(n, n);
    out.B = Mat(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            out.A(j, k) = d2(phi, j, k) + 0.25 * d2(phi, n + j, n + k);
            out.B(j, k) = 0.5 * (d2(phi, j, n + k) - d2(phi, k, n + j));
        }

    out.G = Mat(2 * n, 2 * n);
    out.G.topLeftCorner(n, n) = 0.5 * out.A;
    out.G.topRightCorner(n, n) = out.B;
    out.G.bottomLeftCorner(n, n) = out.B.transpose();
    out.G.bottomRightCorner(n, n) = 2.0 * out.A;

    Eigen::SelfAdjointEigenSolver<Mat> es(out.G);
    out.gmin = es.eigenvalues().minCoeff();
    if (out.gmin < 1e-12)
        throw DegenerateMetric("metric eigenvalue " + std::to_string(out.gmin));
    out.Ginv = out.G.inverse();
    out.Omega = complex_structure_matrix(n).transpose() * out.G;

    if (need_gamma) {
        out.dG.assign(2 * n, Mat::Zero(2 * n, 2 * n));
        for (int a = 0; a < 2 * n; ++a) {
            Mat dA(n, n), dB(n, n);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    dA(j, k) = d3(phi, a, j, k) + 0.25 * d3(phi, a, n + j, n + k);
                    dB(j, k) = 0.5 * (d3(phi, a, j, n + k) - d3(phi, a, k, n + j));
                }
            out.dG[a].topLeftCorner(n, n) = 0.5 * dA;
            out.dG[a].topRightCorner(n, n) = dB;
            out.dG[a].bottomLeftCorner(n, n) = dB.transpose();
            out.dG[a].bottomRightCorner(n, n) = 2.0 * dA;
        }
        out.Gamma.assign(2 * n, Mat::Zero(2 * n, 2 * n));
        for (int b = 0; b < 2 * n; ++b)
            for (int c = b; c < 2 * n; ++c) {
                Vec rhs(2 * n);
                for (int d = 0; d < 2 * n; ++d)
                    rhs[d] = 0.5 * (out.dG[b](d, c) + out.dG[c](d, b) - out.dG[d](b, c));
                Vec gam = out.Ginv * rhs;
                for (int a = 0; a < 2 * n; ++a) {
                    out.Gamma[a](b, c) = gam[a];
                    out.Gamma[a](c, b) = gam[a];
                }
            }
        out.has_gamma = true;
    }

    if (need_ricci) {
        // Ricci from the closed form -ddbar log det of the complex Hessian,
        // assembled with exact jet arithmetic:
        //   Q = (1/2) log det [[A, -B], [B, A]]  (equals log det(A + iB))
        auto sp2 = JetSpace::get(2 * n, 2);
        std::vector<std::vector<Jet>> M(2 * n, std::vector<Jet>(2 * n, Jet(sp2)));
        auto entry_jet = [&](int j, int k, bool atheta) {
            // order-2 jet of A_jk or B_jk from the order-4 potential jet
            Jet e(sp2);
            Jet pj = atheta ? (phi.partial(j).partial(k) + 0.25 * phi.partial(n + j).partial(n + k))
                            : (0.5 * (phi.partial(j).partial(n + k) - phi.partial(k).partial(n + j)));
            // copy the coefficients that are valid to order 2
            for (int idx = 0; idx < sp2->size(); ++idx) {
                int src = phi.space().index_of(sp2->exponent(idx));
                e.coeffs()[idx] = pj.coeffs()[src];
            }
            return e;
        };
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Jet a = entry_jet(j, k, true);
                Jet b = entry_jet(j, k, false);
                M[j][k] = a;
                M[n + j][n + k] = a;
                M[j][n + k] = -1.0 * b;
                M[n + j][k] = b;
            }
        Jet Q = 0.5 * log(jet_det(M));
        Mat RA(n, n), RB(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                RA(j, k) = -(d2(Q, j, k) + 0.25 * d2(Q, n + j, n + k));
                RB(j, k) = -0.5 * (d2(Q, j, n + k) - d2(Q, k, n + j));
            }
        out.Ricci = Mat(2 * n, 2 * n);
        out.Ricci.topLeftCorner(n, n) = 0.5 * RA;
        out.Ricci.topRightCorner(n, n) = RB;
        out.Ricci.bottomLeftCorner(n, n) = RB.transpose();
        out.Ricci.bottomRightCorner(n, n) = 2.0 * RA;
        out.has_ricci = true;
    }
    return out;
}

Vec FlowField::velocity(const Vec& x, const Vec& th, double s) const {
    const int n = dim();
    if (!f1_) return Vec::Zero(2 * n);
    AmbientMetric g = metric_at(s);
    AmbientJets J = g.eval(x, th, false, false);
    Jet f1jet(JetSpace::get(2 * n, 1));
    f1_->add_to_jet(f1jet, x, th, 1.0);
    Vec df(2 * n);
    for (int a = 0; a < 2 * n; ++a) {
        std::vector<int> e(2 * n, 0);
        e[a] = 1;
        df[a] = f1jet.deriv(e);
    }
    // Moser field for the family Omega_s: iota(V) Omega_s = -lambda with
    // lambda = (1/2) J^* d(tau^2 f1), which is -(1/2) grad_{g_hat,s} of
    // tau^2 f1 (the exactness of the pullback identity pins the factor)
    return -0.5 * tau_ * tau_ * (J.Ginv * df);
}

Mat FlowField::velocity_jacobian(const Vec& x, const Vec& th, double s) const {
    const int n = dim();
    if (!f1_) return Mat::Zero(2 * n, 2 * n);
    AmbientMetric g = metric_at(s);
    AmbientJets J = g.eval(x, th, true, false);
    Jet f1jet(JetSpace::get(2 * n, 2));
    f1_->add_to_jet(f1jet, x, th, 1.0);
    Vec df(2 * n);
    Mat ddf(2 * n, 2 * n);
    for (int a = 0; a < 2 * n; ++a) {
        std::vector<int> e(2 * n, 0);
        e[a] = 1;
        df[a] = f1jet.deriv(e);
        for (int b = 0; b < 2 * n; ++b) {
            std::vector<int> e2(2 * n, 0);
            e2[a] += 1;
            e2[b] += 1;
            ddf(a, b) = f1jet.deriv(e2);
        }
    }
    const double t2 = 0.5 * tau_ * tau_;
    Mat Jac(2 * n, 2 * n);
    // d_b (-t2 G^{-1} df) = t2 G^{-1} dG_b G^{-1} df - t2 G^{-1} d_b df
    for (int b = 0; b < 2 * n; ++b)
        Jac.col(b) = -t2 * (-J.Ginv * J.dG[b] * (J.Ginv * df) + J.Ginv * ddf.col(b));
    return Jac;
}

namespace {

// Dormand-Prince 5(4) coefficients
const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
const double a21 = 1.0 / 5;
const double a31 = 3.0 / 40, a32 = 9.0 / 40;
const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
             a54 = -212.0 / 729;
const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
             a65 = -5103.0 / 18656;
const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
             b6 = 11.0 / 84;
const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
             e6 = 22.0 / 525, e7 = -1.0 / 40;

} // namespace

FlowResult flow_point(const FlowField& field, Vec point, double s0, double s1,
                      const FlowOptions& opt, const Mat* frame) {
    const int n = field.dim();
    const int nf = frame ? static_cast<int>(frame->cols()) : 0;
    // state: (x, theta) plus optional frame columns
    Vec y(2 * n * (1 + nf));
    y.head(2 * n) = point;
    for (int c = 0; c < nf; ++c) y.segment(2 * n * (1 + c), 2 * n) = frame->col(c);

    FlowResult out;
    out.s_reached = s0;
    if (field.trivial() || s0 == s1) {
        out.point = point;
        if (frame) {
            out.frames.push_back(*frame);
        }
        out.s_reached = s1;
        return out;
    }

    auto rhs = [&](double s, const Vec& state) {
        Vec x = state.segment(0, n);
        Vec th = state.segment(n, n);
        Vec d(state.size());
        d.head(2 * n) = field.velocity(x, th, s);
        if (nf > 0) {
            Mat Jv = field.velocity_jacobian(x, th, s);
            for (int c = 0; c < nf; ++c)
                d.segment(2 * n * (1 + c), 2 * n) = Jv * state.segment(2 * n * (1 + c), 2 * n);
        }
        return d;
    };

    double s = s0;
    const double dir = (s1 > s0) ? 1.0 : -1.0;
    double h = dir * std::min(opt.max_step, std::abs(s1 - s0));
    Vec k1 = rhs(s, y);
    int steps = 0;
    while (dir * (s1 - s) > 1e-15) {
        if (std::abs(h) > std::abs(s1 - s)) h = s1 - s;
        Vec k2 = rhs(s + c2 * h, y + h * (a21 * k1));
        Vec k3 = rhs(s + c3 * h, y + h * (a31 * k1 + a32 * k2));
        Vec k4 = rhs(s + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        Vec k5 = rhs(s + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Vec k6 = rhs(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Vec ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Vec k7 = rhs(s + h, ynew);
        Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double scale = opt.tol * (1.0 + y.head(2 * n).cwiseAbs().maxCoeff());
        double errn = err.cwiseAbs().maxCoeff() / scale;
        if (errn <= 1.0) {
            s += h;
            y = ynew;
            k1 = k7;
            ++steps;
            if (opt.region_c > 0.0) {
                Vec x = y.segment(0, n);
                if (!field.base().inside(x, opt.region_c))
                    throw LeftRegion("flow trajectory exited the region at s = " + std::to_string(s));
            }
            if (steps > opt.max_steps) throw FlowFailure("step budget exhausted");
        }
        double fac = 0.9 * std::pow(std::max(errn, 1e-10), -0.2);
        fac = std::min(5.0, std::max(0.2, fac));
        h *= fac;
        if (std::abs(h) < opt.min_step)
            throw StepUnderflow("flow step underflow at s = " + std::to_string(s));
        if (std::abs(h) > opt.max_step) h = dir * opt.max_step;
    }
    out.point = y.head(2 * n);
    out.steps = steps;
    out.s_reached = s1;
    if (nf > 0) {
        Mat F(2 * n, nf);
        for (int c = 0; c < nf; ++c) F.col(c) = y.segment(2 * n * (1 + c), 2 * n);
        out.frames.push_back(F);
    }
    return out;
}

double pullback_defect(const FlowField& field, const Vec& point, double s,
                       const FlowOptions& opt) {
    const int n = field.dim();
    Mat frame = Mat::Identity(2 * n, 2 * n);
    FlowResult fr = flow_point(field, point, 0.0, s, opt, &frame);

    AmbientMetric g0 = field.metric_at(0.0);
    AmbientMetric gs = field.metric_at(s);
    AmbientJets j0 = g0.eval(point.head(n), point.tail(n), false, false);
    AmbientJets js = gs.eval(fr.point.head(n), fr.point.tail(n), false, false);

    const Mat& F = fr.frames[0];
    Mat pulled = F.transpose() * js.Omega * F;
    double defect = (pulled - j0.Omega).cwiseAbs().maxCoeff();
    return defect;
}

double einstein_deviation(const AmbientMetric& metric, const std::vector<Vec>& xs,
                          const std::vector<Vec>& ths, double lambda) {
    double worst = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        AmbientJets j = metric.eval(xs[i], ths[i % ths.size()], false, true);
        worst = std::max(worst, (j.Ricci + lambda * j.G).cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace hml
