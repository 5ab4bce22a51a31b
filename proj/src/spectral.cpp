#include "hml/spectral.hpp"

namespace hml {

IterSolveResult pcg(const LinOp& A, const Vec& b, const LinOp& M, double tol, int maxit,
                    const std::function<double(const Vec&, const Vec&)>* ip) {
    auto dot = [&](const Vec& u, const Vec& v) { return ip ? (*ip)(u, v) : u.dot(v); };
    IterSolveResult out;
    out.x = Vec::Zero(b.size());
    Vec r = b;
    double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    Vec z = M ? M(r) : r;
    Vec p = z;
    double rz = dot(r, z);
    for (int it = 0; it < maxit; ++it) {
        Vec Ap = A(p);
        double pAp = dot(p, Ap);
        if (pAp <= 0.0) break; // lost positivity, bail out with best iterate
        double alpha = rz / pAp;
        out.x += alpha * p;
        r -= alpha * Ap;
        out.iterations = it + 1;
        double rn = std::sqrt(dot(r, r));
        out.residual = rn / bnorm;
        if (out.residual < tol) {
            out.converged = true;
            return out;
        }
        z = M ? M(r) : r;
        double rz_new = dot(r, z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    return out;
}

IterSolveResult gmres(const LinOp& A, const Vec& b, const LinOp& M, double tol, int maxit,
                      int restart) {
    IterSolveResult out;
    const int n = static_cast<int>(b.size());
    out.x = Vec::Zero(n);
    double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    int total_it = 0;
    while (total_it < maxit) {
        Vec r = b - A(out.x);
        double beta = r.norm();
        out.residual = beta / bnorm;
        if (out.residual < tol) {
            out.converged = true;
            return out;
        }
        const int m = std::min(restart, maxit - total_it);
        Mat V(n, m + 1);
        Mat H = Mat::Zero(m + 1, m);
        V.col(0) = r / beta;
        Vec cs = Vec::Zero(m), sn = Vec::Zero(m), g = Vec::Zero(m + 1);
        g[0] = beta;
        int k = 0;
        for (; k < m; ++k) {
            Vec w = A(M ? M(V.col(k)) : Vec(V.col(k)));
            for (int i = 0; i <= k; ++i) {
                H(i, k) = w.dot(V.col(i));
                w -= H(i, k) * V.col(i);
            }
            H(k + 1, k) = w.norm();
            if (H(k + 1, k) > 1e-300) V.col(k + 1) = w / H(k + 1, k);
            // apply stored Givens rotations
            for (int i = 0; i < k; ++i) {
                double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
                H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
                H(i, k) = t;
            }
            double denom = std::hypot(H(k, k), H(k + 1, k));
            if (denom == 0.0) {
                ++k;
                break;
            }
            cs[k] = H(k, k) / denom;
            sn[k] = H(k + 1, k) / denom;
            H(k, k) = denom;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++total_it;
            out.iterations = total_it;
            out.residual = std::abs(g[k + 1]) / bnorm;
            if (out.residual < tol) {
                ++k;
                break;
            }
        }
        // back substitution on the k x k triangular system
        Vec y = Vec::Zero(k);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
            y[i] = s / H(i, i);
        }
        Vec update = V.leftCols(k) * y;
        out.x += M ? M(update) : update;
        if (out.residual < tol) {
            out.converged = true;
            return out;
        }
        if (k == 0) break;
    }
    out.residual = (b - A(out.x)).norm() / bnorm;
    out.converged = out.residual < tol;
    return out;
}

} // namespace hml
