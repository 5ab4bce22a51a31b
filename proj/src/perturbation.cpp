#include "hml/perturbation.hpp"

namespace hml {

namespace {

// Taylor coefficients (deriv/k!) of exp(-u^2/2) in x around x0, u = (x-c)/w,
// via the probabilists' Hermite recurrence He_{k+1} = u He_k - k He_{k-1},
// d^k/du^k e^{-u^2/2} = (-1)^k He_k(u) e^{-u^2/2}.
void gauss_coeffs(double x0, double c, double w, int order, std::vector<double>& out) {
    double u = (x0 - c) / w;
    double g = std::exp(-0.5 * u * u);
    std::vector<double> He(order + 1);
    He[0] = 1.0;
    if (order >= 1) He[1] = u;
    for (int k = 1; k < order; ++k) He[k + 1] = u * He[k] - k * He[k - 1];
    out.assign(order + 1, 0.0);
    double fact = 1.0, wk = 1.0, sign = 1.0;
    for (int k = 0; k <= order; ++k) {
        out[k] = sign * He[k] * g / (fact * wk);
        fact *= (k + 1);
        wk *= w;
        sign = -sign;
    }
}

} // namespace

Eigen::VectorXi ModeSum::effective_freq(const ModeTerm& t) const {
    if (t.profile == ModeTerm::kGauss) return t.freq;
    Eigen::VectorXi k = Eigen::VectorXi::Zero(fan_.n);
    for (int m = 0; m < fan_.ray_count(); ++m)
        for (int j = 0; j < fan_.n; ++j)
            k[j] += static_cast<int>(std::lround(t.powers[m])) * fan_.rays[m][j];
    return k;
}

void ModeSum::add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const {
    const JetSpace& sp = out.space();
    const int n = fan_.n;
    const int order = sp.order();

    for (const ModeTerm& t : terms_) {
        const double a = t.effective_amp(tau_) * scale;
        if (a == 0.0) continue;
        Eigen::VectorXi K = effective_freq(t);

        // x-profile Taylor coefficients per axis (gauss) or as exp(affine)
        std::vector<std::vector<double>> axis(n);
        double smono_val = 0.0;
        Vec smono_slope;
        if (t.profile == ModeTerm::kGauss) {
            for (int i = 0; i < n; ++i) gauss_coeffs(x[i], t.center[i], t.width[i], order, axis[i]);
        } else {
            // exp((tau/2) sum_m p_m q_m(x)) = exp(b + <a, x>)
            smono_slope = Vec::Zero(n);
            double b = 0.0;
            for (int m = 0; m < fan_.ray_count(); ++m) {
                b += 0.5 * tau_ * t.powers[m] * fan_.weights[m];
                for (int j = 0; j < n; ++j) smono_slope[j] += 0.5 * t.powers[m] * fan_.rays[m][j];
            }
            smono_val = std::exp(b + smono_slope.dot(x));
        }

        double kth = K.cast<double>().dot(th);
        for (int idx = 0; idx < sp.size(); ++idx) {
            const auto& gamma = sp.exponent(idx);
            // x part
            double cx = 1.0;
            if (t.profile == ModeTerm::kGauss) {
                for (int i = 0; i < n; ++i) cx *= axis[i][gamma[i]];
            } else {
                double fact = 1.0;
                for (int i = 0; i < n; ++i) {
                    for (int v = 0; v < gamma[i]; ++v) cx *= smono_slope[i];
                    for (int v = 2; v <= gamma[i]; ++v) fact *= v;
                }
                cx *= smono_val / fact;
            }
            if (cx == 0.0) continue;
            // theta part: d^g cos(<K,th>+phase) = (prod K^g) cos(. + pi/2 |g|)
            int tdeg = 0;
            double kprod = 1.0, tfact = 1.0;
            for (int i = 0; i < n; ++i) {
                int g = gamma[n + i];
                tdeg += g;
                for (int v = 0; v < g; ++v) kprod *= K[i];
                for (int v = 2; v <= g; ++v) tfact *= v;
            }
            if (kprod == 0.0 && tdeg > 0) continue;
            double ct = kprod * std::cos(kth + t.phase + 0.5 * kPi * tdeg) / tfact;
            out.coeffs()[idx] += a * cx * ct;
        }
    }
}

void SynthKEField::add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const {
    auto sp = out.space_ptr();
    const int n = fan_.n;

    Jet acc(sp);
    if (b0_) b0_->add_to_jet(acc, x, th, 1.0);
    if (b1_) b1_->add_to_jet(acc, x, th, 1.0);

    for (int m = 0; m < fan_.ray_count(); ++m) {
        // tau * q_m = tau w_m + <m, x> as a jet (affine in x)
        Jet tq = Jet::constant(sp, tau_ * fan_.weights[m]);
        for (int j = 0; j < n; ++j)
            if (fan_.rays[m][j] != 0) tq += double(fan_.rays[m][j]) * Jet::variable(sp, j, x[j]);

        Jet bm = Jet::constant(sp, m < static_cast<int>(bm_const_.size()) ? bm_const_[m] : 0.0);
        if (m < static_cast<int>(bm_fields_.size()) && bm_fields_[m])
            bm_fields_[m]->add_to_jet(bm, x, th, 1.0);

        Jet u = Jet::constant(sp, 1.0) + bm / tq;
        if (u.value() <= 0.0)
            throw AmplitudeTooLarge("1 + b_m/(tau q_m) changes sign inside the region");
        acc -= log(u * u);
    }
    out += acc * scale;
}

void FiberAverageField::add_to_jet(Jet& out, const Vec& x, const Vec& th, double scale) const {
    (void)th;
    auto sp = out.space_ptr();
    Jet acc(sp);
    const int P = pts_;
    long total = 1;
    for (int a = 0; a < n_; ++a) total *= P;
    Vec tq(n_);
    for (long it = 0; it < total; ++it) {
        long rem = it;
        for (int a = 0; a < n_; ++a) {
            tq[a] = kTwoPi * (rem % P) / P;
            rem /= P;
        }
        src_->add_to_jet(acc, x, tq, 1.0);
    }
    acc *= 1.0 / static_cast<double>(total);
    // keep only theta-independent coefficients: the average of the x-jet
    for (int idx = 0; idx < sp->size(); ++idx) {
        const auto& gamma = sp->exponent(idx);
        bool theta_dep = false;
        for (int j = n_; j < sp->dim(); ++j)
            if (gamma[j] != 0) theta_dep = true;
        if (!theta_dep) out.coeffs()[idx] += scale * acc.coeffs()[idx];
    }
}

PerturbationSplit fiber_decompose(const FieldPtr& f, int n, int quad_points) {
    PerturbationSplit split;
    split.quad_points = quad_points;
    if (!f) {
        split.f0 = nullptr;
        split.f1 = nullptr;
        return split;
    }
    // structural split when the field is a pure mode sum
    if (auto ms = std::dynamic_pointer_cast<const ModeSum>(f)) {
        auto parts = ms->split_by_freq();
        split.f0 = parts.first;
        split.f1 = parts.second;
        return split;
    }
    auto f0 = std::make_shared<FiberAverageField>(f, n, quad_points);
    split.f0 = f0;
    split.f1 = std::make_shared<SumField>(std::vector<FieldPtr>{f, f0},
                                          std::vector<double>{1.0, -1.0});
    return split;
}

} // namespace hml
