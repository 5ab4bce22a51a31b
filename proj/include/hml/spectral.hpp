#ifndef HML_SPECTRAL_HPP
#define HML_SPECTRAL_HPP

#include "hml/common.hpp"
#include "hml/errors.hpp"

#include <complex>
#include <functional>

namespace hml {

using VecC = Eigen::VectorXcd;

// Uniform grid on T^n with 2N+1 points per axis. Values live on the grid;
// derivatives are taken in coefficient space (exact for band-limited data).
class TorusGrid {
  public:
    TorusGrid(int n, int N) : n_(n), N_(N), P_(2 * N + 1) {
        size_ = 1;
        for (int a = 0; a < n_; ++a) size_ *= P_;
        // twiddle matrices for one axis
        fwd_ = Eigen::MatrixXcd(P_, P_);
        bwd_ = Eigen::MatrixXcd(P_, P_);
        for (int k = -N_; k <= N_; ++k)
            for (int j = 0; j < P_; ++j) {
                double ang = kTwoPi * j * k / P_;
                fwd_(k + N_, j) = std::complex<double>(std::cos(ang), -std::sin(ang)) / double(P_);
                bwd_(j, k + N_) = std::complex<double>(std::cos(ang), std::sin(ang));
            }
        strides_.resize(n_);
        int s = 1;
        for (int a = 0; a < n_; ++a) {
            strides_[a] = s;
            s *= P_;
        }
    }

    int dim() const { return n_; }
    int modes() const { return N_; }
    int pts_per_axis() const { return P_; }
    int size() const { return size_; }

    double theta(int axis_index) const { return kTwoPi * axis_index / P_; }

    std::vector<int> unflatten(int idx) const {
        std::vector<int> m(n_);
        for (int a = 0; a < n_; ++a) {
            m[a] = idx % P_;
            idx /= P_;
        }
        return m;
    }

    int flatten(const std::vector<int>& m) const {
        int idx = 0;
        for (int a = 0; a < n_; ++a) idx += m[a] * strides_[a];
        return idx;
    }

    Vec theta_of(int idx) const {
        Vec t(n_);
        for (int a = 0; a < n_; ++a) {
            t[a] = theta(idx % P_);
            idx /= P_;
        }
        return t;
    }

    VecC to_coeff(const Vec& f) const {
        VecC c = f.cast<std::complex<double>>();
        for (int a = 0; a < n_; ++a) transform_axis(c, a, fwd_);
        return c;
    }

    Vec from_coeff(VecC c) const {
        for (int a = 0; a < n_; ++a) transform_axis(c, a, bwd_);
        return c.real();
    }

    // spectral partial derivative along one torus axis
    Vec deriv(const Vec& f, int axis) const {
        VecC c = to_coeff(f);
        scale_by_ik(c, axis);
        return from_coeff(std::move(c));
    }

    void scale_by_ik(VecC& c, int axis) const {
        for (int idx = 0; idx < size_; ++idx) {
            int k = (idx / strides_[axis]) % P_ - N_;
            c[idx] *= std::complex<double>(0.0, double(k));
        }
    }

    double mean(const Vec& f) const { return f.mean(); }

    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < n_; ++a) v *= kTwoPi / P_;
        return v;
    }

    // integral against a density field
    double integrate(const Vec& f, const Vec& density) const {
        return f.dot(density) * cell_volume();
    }

    double integrate(const Vec& f) const { return f.sum() * cell_volume(); }

  private:
    void transform_axis(VecC& c, int axis, const Eigen::MatrixXcd& mat) const {
        const int stride = strides_[axis];
        VecC line(P_);
        for (int base = 0; base < size_; ++base) {
            if ((base / stride) % P_ != 0) continue;
            for (int j = 0; j < P_; ++j) line[j] = c[base + j * stride];
            for (int k = 0; k < P_; ++k) {
                std::complex<double> acc(0.0, 0.0);
                for (int j = 0; j < P_; ++j) acc += mat(k, j) * line[j];
                c[base + k * stride] = acc;
            }
        }
    }

    int n_, N_, P_, size_;
    std::vector<int> strides_;
    Eigen::MatrixXcd fwd_, bwd_;
};

// Real mode basis {cos<k,t>, sin<k,t>} over the half-space of frequencies
// (first nonzero component positive), excluding k = 0. Gives an exact
// invertible parametrization of mean-zero real band-limited functions.
class ModeBasis {
  public:
    explicit ModeBasis(const TorusGrid& g) : grid_(&g) {
        const int N = g.modes();
        std::vector<int> k(g.dim());
        enumerate(k, 0, N);
    }

    int size() const { return 2 * static_cast<int>(freqs_.size()); }
    const std::vector<Vec>& freqs() const { return freqs_; }

    // |k|^2 with respect to a constant inverse metric (for preconditioners)
    double quad_form(int mode_index, const Mat& ginv) const {
        const Vec& k = freqs_[mode_index / 2];
        return k.dot(ginv * k);
    }

    Vec to_field(const Vec& a) const {
        const TorusGrid& g = *grid_;
        VecC c = VecC::Zero(g.size());
        const int N = g.modes(), P = g.pts_per_axis();
        for (size_t m = 0; m < freqs_.size(); ++m) {
            // f += ac cos<k,t> + as sin<k,t>  ->  c_k = (ac - i as)/2, c_{-k} = conj
            std::complex<double> ck(0.5 * a[2 * m], -0.5 * a[2 * m + 1]);
            int ip = 0, in = 0, s = 1;
            for (int ax = 0; ax < g.dim(); ++ax) {
                int kv = static_cast<int>(freqs_[m][ax]);
                ip += (kv + N) * s;
                in += (-kv + N) * s;
                s *= P;
            }
            c[ip] += ck;
            c[in] += std::conj(ck);
        }
        return g.from_coeff(std::move(c));
    }

    Vec from_field(const Vec& f) const {
        const TorusGrid& g = *grid_;
        VecC c = g.to_coeff(f);
        const int N = g.modes(), P = g.pts_per_axis();
        Vec a(size());
        for (size_t m = 0; m < freqs_.size(); ++m) {
            int ip = 0, s = 1;
            for (int ax = 0; ax < g.dim(); ++ax) {
                ip += (static_cast<int>(freqs_[m][ax]) + N) * s;
                s *= P;
            }
            a[2 * m] = 2.0 * c[ip].real();
            a[2 * m + 1] = -2.0 * c[ip].imag();
        }
        return a;
    }

  private:
    void enumerate(std::vector<int>& k, int pos, int N) {
        if (pos == static_cast<int>(k.size())) {
            int first = 0;
            for (int v : k)
                if (v != 0) {
                    first = v;
                    break;
                }
            if (first > 0) {
                Vec kv(k.size());
                for (size_t i = 0; i < k.size(); ++i) kv[i] = k[i];
                freqs_.push_back(kv);
            }
            return;
        }
        for (int v = -N; v <= N; ++v) {
            k[pos] = v;
            enumerate(k, pos + 1, N);
        }
    }

    const TorusGrid* grid_;
    std::vector<Vec> freqs_;
};

// Matrix-free linear solvers used for the spectral Poisson problems and the
// Newton linearization.
using LinOp = std::function<Vec(const Vec&)>;

struct IterSolveResult {
    Vec x;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Preconditioned conjugate gradients for SPD operators (inner product may be
// weighted; pass ip = nullptr for the Euclidean one).
IterSolveResult pcg(const LinOp& A, const Vec& b, const LinOp& M, double tol, int maxit,
                    const std::function<double(const Vec&, const Vec&)>* ip = nullptr);

// Restarted GMRES with right preconditioning.
IterSolveResult gmres(const LinOp& A, const Vec& b, const LinOp& M, double tol, int maxit,
                      int restart = 60);

} // namespace hml

#endif
