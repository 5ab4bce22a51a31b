#ifndef HML_SYMBOLIC1D_HPP
#define HML_SYMBOLIC1D_HPP

#include "hml/errors.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace hml {

// Tiny symbolic differentiator for 1-D potentials built from polynomials,
// logs and exponentials. This is an oracle: it is deliberately independent
// of the Taylor-jet engine (rule-based tree rewriting instead of series
// arithmetic) so the two can check each other.
namespace sym {

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
    enum Kind { kConst, kVar, kAdd, kMul, kLog, kExp, kPow } kind;
    double cval = 0.0;
    int ipow = 0;
    Expr a, b;
};

inline Expr constant(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::kConst;
    n->cval = v;
    return n;
}

inline Expr var() {
    auto n = std::make_shared<Node>();
    n->kind = Node::kVar;
    return n;
}

inline Expr add(Expr a, Expr b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::kAdd;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

inline Expr mul(Expr a, Expr b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::kMul;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

inline Expr scale(double s, Expr a) { return mul(constant(s), std::move(a)); }
inline Expr sub(Expr a, Expr b) { return add(std::move(a), scale(-1.0, std::move(b))); }

inline Expr log(Expr a) {
    auto n = std::make_shared<Node>();
    n->kind = Node::kLog;
    n->a = std::move(a);
    return n;
}

inline Expr exp(Expr a) {
    auto n = std::make_shared<Node>();
    n->kind = Node::kExp;
    n->a = std::move(a);
    return n;
}

inline Expr pow(Expr a, int k) {
    auto n = std::make_shared<Node>();
    n->kind = Node::kPow;
    n->ipow = k;
    n->a = std::move(a);
    return n;
}

inline double eval(const Expr& e, double x) {
    switch (e->kind) {
        case Node::kConst: return e->cval;
        case Node::kVar: return x;
        case Node::kAdd: return eval(e->a, x) + eval(e->b, x);
        case Node::kMul: return eval(e->a, x) * eval(e->b, x);
        case Node::kLog: {
            double u = eval(e->a, x);
            if (u <= 0.0) throw BoundaryEvaluation("symbolic log of non-positive argument");
            return std::log(u);
        }
        case Node::kExp: return std::exp(eval(e->a, x));
        case Node::kPow: return std::pow(eval(e->a, x), e->ipow);
    }
    throw UnsupportedExpression("unknown node");
}

inline Expr diff(const Expr& e) {
    switch (e->kind) {
        case Node::kConst: return constant(0.0);
        case Node::kVar: return constant(1.0);
        case Node::kAdd: return add(diff(e->a), diff(e->b));
        case Node::kMul: return add(mul(diff(e->a), e->b), mul(e->a, diff(e->b)));
        case Node::kLog: return mul(diff(e->a), pow(e->a, -1));
        case Node::kExp: return mul(diff(e->a), exp(e->a));
        case Node::kPow:
            if (e->ipow == 0) return constant(0.0);
            return mul(constant(static_cast<double>(e->ipow)),
                       mul(diff(e->a), pow(e->a, e->ipow - 1)));
    }
    throw UnsupportedExpression("unknown node");
}

} // namespace sym

// Derivative evaluators to order 6 for a closed-form 1-D expression.
class Symbolic1D {
  public:
    explicit Symbolic1D(sym::Expr e, int max_order = 6) {
        trees_.push_back(std::move(e));
        for (int k = 1; k <= max_order; ++k) trees_.push_back(sym::diff(trees_.back()));
    }

    int max_order() const { return static_cast<int>(trees_.size()) - 1; }

    double deriv(int order, double x) const {
        if (order < 0 || order > max_order())
            throw UnsupportedExpression("derivative order out of range");
        return sym::eval(trees_[order], x);
    }

    double operator()(double x) const { return deriv(0, x); }

  private:
    std::vector<sym::Expr> trees_;
};

// The 1-D toric model potentials as symbolic expressions.
namespace sym_presets {

// rho(x) = -sum_m log(<m,x> + w_m)^2 for 1-D rays
inline sym::Expr toric_1d(const std::vector<double>& rays, const std::vector<double>& weights) {
    sym::Expr total = sym::constant(0.0);
    for (size_t i = 0; i < rays.size(); ++i) {
        sym::Expr lin = sym::add(sym::scale(rays[i], sym::var()), sym::constant(weights[i]));
        total = sym::sub(total, sym::log(sym::pow(lin, 2)));
    }
    return total;
}

} // namespace sym_presets

} // namespace hml

#endif
