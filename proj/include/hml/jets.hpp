#ifndef HML_JETS_HPP
#define HML_JETS_HPP

#include "hml/common.hpp"
#include "hml/errors.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace hml {

// Truncated multivariate Taylor arithmetic. A Jet stores the Taylor
// coefficients c_gamma = d^gamma f / gamma! of a scalar function at a base
// point, for all multi-indices |gamma| <= order. Arithmetic on jets gives
// exact derivatives of composite expressions (series arithmetic, not finite
// differences).
class JetSpace {
  public:
    JetSpace(int dim, int order) : dim_(dim), order_(order) {
        build_exponents();
        build_product_table();
    }

    int dim() const { return dim_; }
    int order() const { return order_; }
    int size() const { return static_cast<int>(exps_.size()); }

    const std::vector<int>& exponent(int idx) const { return exps_[idx]; }
    int degree(int idx) const { return degs_[idx]; }

    int index_of(const std::vector<int>& gamma) const {
        auto it = lookup_.find(pack(gamma));
        return it == lookup_.end() ? -1 : it->second;
    }

    // index of the product monomial, or -1 when it exceeds the order
    int product_index(int i, int j) const { return prod_[static_cast<size_t>(i) * exps_.size() + j]; }

    static std::shared_ptr<const JetSpace> get(int dim, int order);

  private:
    void build_exponents() {
        std::vector<int> g(dim_, 0);
        // graded enumeration: all exponents of total degree k, k = 0..order
        for (int k = 0; k <= order_; ++k) enumerate(g, 0, k);
        for (size_t i = 0; i < exps_.size(); ++i) lookup_[pack(exps_[i])] = static_cast<int>(i);
    }

    void enumerate(std::vector<int>& g, int pos, int remaining) {
        if (pos == dim_ - 1) {
            g[pos] = remaining;
            exps_.push_back(g);
            degs_.push_back(0);
            for (int v : g) degs_.back() += v;
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            g[pos] = v;
            enumerate(g, pos + 1, remaining - v);
        }
        g[pos] = 0;
    }

    void build_product_table() {
        const size_t n = exps_.size();
        prod_.assign(n * n, -1);
        std::vector<int> sum(dim_);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                if (degs_[i] + degs_[j] > order_) continue;
                for (int d = 0; d < dim_; ++d) sum[d] = exps_[i][d] + exps_[j][d];
                prod_[i * n + j] = lookup_.at(pack(sum));
            }
        }
    }

    std::uint64_t pack(const std::vector<int>& g) const {
        std::uint64_t key = 0;
        for (int v : g) key = key * 64 + static_cast<std::uint64_t>(v);
        return key;
    }

    int dim_;
    int order_;
    std::vector<std::vector<int>> exps_;
    std::vector<int> degs_;
    std::map<std::uint64_t, int> lookup_;
    std::vector<int> prod_;
};

inline std::shared_ptr<const JetSpace> JetSpace::get(int dim, int order) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(dim, order);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto sp = std::make_shared<const JetSpace>(dim, order);
    cache[key] = sp;
    return sp;
}

class Jet {
  public:
    Jet() = default;
    explicit Jet(std::shared_ptr<const JetSpace> sp) : sp_(std::move(sp)), c_(Vec::Zero(sp_->size())) {}

    static Jet constant(std::shared_ptr<const JetSpace> sp, double v) {
        Jet j(std::move(sp));
        j.c_[0] = v;
        return j;
    }

    // the coordinate function x_i, expanded at base value x0
    static Jet variable(std::shared_ptr<const JetSpace> sp, int i, double x0) {
        Jet j(std::move(sp));
        j.c_[0] = x0;
        std::vector<int> e(j.sp_->dim(), 0);
        e[i] = 1;
        if (j.sp_->order() >= 1) j.c_[j.sp_->index_of(e)] = 1.0;
        return j;
    }

    const JetSpace& space() const { return *sp_; }
    std::shared_ptr<const JetSpace> space_ptr() const { return sp_; }
    double value() const { return c_[0]; }
    Vec& coeffs() { return c_; }
    const Vec& coeffs() const { return c_; }

    // derivative d^gamma f (Taylor coefficient times gamma!)
    double deriv(const std::vector<int>& gamma) const {
        int idx = sp_->index_of(gamma);
        if (idx < 0) throw Error("Jet::deriv: order exceeded");
        double fact = 1.0;
        for (int v : gamma)
            for (int k = 2; k <= v; ++k) fact *= k;
        return c_[idx] * fact;
    }

    // jet of the partial derivative (same space, top order lost)
    Jet partial(int i) const {
        Jet out(sp_);
        std::vector<int> g;
        for (int idx = 0; idx < sp_->size(); ++idx) {
            g = sp_->exponent(idx);
            g[i] += 1;
            int src = sp_->index_of(g);
            if (src >= 0) out.c_[idx] = c_[src] * g[i];
        }
        return out;
    }

    Jet& operator+=(const Jet& o) { c_ += o.c_; return *this; }
    Jet& operator-=(const Jet& o) { c_ -= o.c_; return *this; }
    Jet& operator*=(double s) { c_ *= s; return *this; }
    Jet& operator+=(double s) { c_[0] += s; return *this; }

    friend Jet operator+(Jet a, const Jet& b) { a += b; return a; }
    friend Jet operator-(Jet a, const Jet& b) { a -= b; return a; }
    friend Jet operator*(Jet a, double s) { a *= s; return a; }
    friend Jet operator*(double s, Jet a) { a *= s; return a; }
    friend Jet operator+(Jet a, double s) { a += s; return a; }
    friend Jet operator+(double s, Jet a) { a += s; return a; }
    friend Jet operator-(Jet a, double s) { a += -s; return a; }
    friend Jet operator-(double s, Jet a) { a *= -1.0; a += s; return a; }

    friend Jet operator*(const Jet& a, const Jet& b) {
        const JetSpace& sp = *a.sp_;
        Jet out(a.sp_);
        const int n = sp.size();
        for (int i = 0; i < n; ++i) {
            const double ai = a.c_[i];
            if (ai == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                int k = sp.product_index(i, j);
                if (k >= 0) out.c_[k] += ai * b.c_[j];
            }
        }
        return out;
    }

    // compose a univariate analytic function: out = f(this), given the
    // derivatives f^(k)(value()) for k = 0..order
    Jet compose(const std::vector<double>& fk) const {
        Jet v = *this;
        v.c_[0] = 0.0; // the fluctuation part
        Jet out = Jet::constant(sp_, fk[0]);
        Jet pw = Jet::constant(sp_, 1.0);
        double fact = 1.0;
        for (int k = 1; k <= sp_->order(); ++k) {
            pw = pw * v;
            fact *= k;
            if (k < static_cast<int>(fk.size()) && fk[k] != 0.0) out += pw * (fk[k] / fact);
        }
        return out;
    }

  private:
    std::shared_ptr<const JetSpace> sp_;
    Vec c_;
};

inline Jet log(const Jet& u) {
    double u0 = u.value();
    if (u0 <= 0.0) throw Error("Jet log of non-positive value");
    int p = u.space().order();
    std::vector<double> fk(p + 1);
    fk[0] = std::log(u0);
    double pw = 1.0 / u0, sign = 1.0, fact = 1.0;
    for (int k = 1; k <= p; ++k) {
        fk[k] = sign * fact * pw;      // d^k log = (-1)^{k-1} (k-1)! u^{-k}
        pw /= u0;
        sign = -sign;
        fact *= k;
    }
    return u.compose(fk);
}

inline Jet exp(const Jet& u) {
    int p = u.space().order();
    std::vector<double> fk(p + 1, std::exp(u.value()));
    return u.compose(fk);
}

inline Jet inv(const Jet& u) {
    double u0 = u.value();
    if (u0 == 0.0) throw Error("Jet inverse of zero");
    int p = u.space().order();
    std::vector<double> fk(p + 1);
    double pw = 1.0 / u0, sign = 1.0, fact = 1.0;
    for (int k = 0; k <= p; ++k) {
        fk[k] = sign * fact * pw;      // d^k u^{-1} = (-1)^k k! u^{-k-1}
        pw /= u0;
        sign = -sign;
        fact *= (k + 1);
    }
    return u.compose(fk);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * inv(b); }

inline Jet sqrt(const Jet& u) {
    double u0 = u.value();
    if (u0 <= 0.0) throw Error("Jet sqrt of non-positive value");
    int p = u.space().order();
    std::vector<double> fk(p + 1);
    double r = std::sqrt(u0);
    fk[0] = r;
    double coef = 0.5;
    double pw = r / u0;
    for (int k = 1; k <= p; ++k) {
        fk[k] = coef * pw;
        coef *= (0.5 - k);
        pw /= u0;
    }
    return u.compose(fk);
}

inline Jet sin(const Jet& u);
inline Jet cos(const Jet& u) {
    int p = u.space().order();
    double c = std::cos(u.value()), s = std::sin(u.value());
    std::vector<double> fk(p + 1);
    const double cyc[4] = {c, -s, -c, s};
    for (int k = 0; k <= p; ++k) fk[k] = cyc[k % 4];
    return u.compose(fk);
}

inline Jet sin(const Jet& u) {
    int p = u.space().order();
    double c = std::cos(u.value()), s = std::sin(u.value());
    std::vector<double> fk(p + 1);
    const double cyc[4] = {s, c, -s, -c};
    for (int k = 0; k <= p; ++k) fk[k] = cyc[k % 4];
    return u.compose(fk);
}

} // namespace hml

#endif
