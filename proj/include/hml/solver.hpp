#ifndef HML_SOLVER_HPP
#define HML_SOLVER_HPP

#include "hml/lagrangian.hpp"

namespace hml {

struct SolverConfig {
    double newton_tol = 1e-10;   // sup-norm of the residual d* alpha
    int max_newton = 12;
    int stages = 10;             // uniform s-stages, adaptive halving on failure
    double min_step = 1.0 / 160.0;
    double linear_tol = 1e-12;
    int linear_maxit = 400;
    double ode_tol = 1e-12;
    int dense_guard_dim = 200;   // exact inverse-norm below this dimension
    bool collect_guards = true;
};

struct StageRecord {
    double s = 0.0;
    double step = 0.0;
    int newton_iters = 0;
    double residual_before = 0.0;
    double residual_after = 0.0;
    double inverse_norm = 0.0;   // measured ||dPhi/dh^{-1}||
    double lipschitz = 0.0;      // difference quotient of linearizations
    bool accepted = false;
};

struct ContinuationState {
    double s = 0.0;
    Vec h;                        // grid values, mean zero
    double residual_norm = 0.0;
    std::vector<StageRecord> records;
    std::vector<double> newton_history; // residuals of the last newton run
};

// Residual and linearization of Phi(h, s) = d* alpha_{L(h)} where the
// geometry is evaluated on the flowed torus phi_s(L(h)) under g_hat(s).
class FiberProblem {
  public:
    FiberProblem(const FiberChart* chart, const FlowField* flow,
                 std::shared_ptr<const TorusGrid> grid, SolverConfig cfg);

    const TorusGrid& grid() const { return *grid_; }
    const ModeBasis& basis() const { return basis_; }
    const FiberChart& chart() const { return *chart_; }
    const SolverConfig& config() const { return cfg_; }

    GeometrySample sample(const Vec& h_grid, double s, bool need_ricci = true) const;
    Vec residual_field(const GeometrySample& smp) const { return codifferential(smp, smp.alpha); }
    Vec residual(const Vec& h_grid, double s) const;

    // dPhi/dh applied to dh (grid field), on a fixed geometry sample
    Vec linearize_apply(const GeometrySample& smp, const Vec& dh_grid) const;

    // deviation of the linearization at (0,0) from the flat bilaplacian of
    // the fiber metric (diagnostic for large tau)
    double bilaplacian_deviation() const;

    // damped Newton at fixed s
    ContinuationState newton_solve(double s, const Vec& h_init, std::vector<double>* history = nullptr) const;

    // march s: 0 -> 1 with warm starts and adaptive step halving
    ContinuationState continue_path() const;

    // dense linearization matrix in mode-basis coordinates (guards, tests)
    Mat dense_linearization(const GeometrySample& smp) const;

  private:
    Vec solve_linear(const GeometrySample& smp, const Vec& rhs_field, double* inv_norm) const;

    const FiberChart* chart_;
    const FlowField* flow_;
    std::shared_ptr<const TorusGrid> grid_;
    ModeBasis basis_;
    SolverConfig cfg_;
};

struct FibrationPoint {
    Vec x;
    bool ok = false;
    std::string error;
    double h_norm = 0.0;        // sup norm of h
    double residual = 0.0;
    Vec alpha_class;            // harmonic class coordinates
    double margin = 0.0;        // min_theta |deformation one-form|
    double toric_margin = 0.0;  // same for the unperturbed toric fiber
    ContinuationState state;
};

struct FibrationResult {
    std::vector<FibrationPoint> points;
    bool all_ok = true;
};

// Deformation one-forms with prescribed harmonic class (kernel elements of
// the linearized problem); margin = min over theta of the pointwise norm.
double nondegeneracy_margin(const FiberProblem& prob, const GeometrySample& smp);

FibrationResult sweep_fibration(const BasePotential& base, const FieldPtr& f0,
                                const FieldPtr& f1, double region_c,
                                const std::vector<Vec>& base_points, int N,
                                const SolverConfig& cfg);

} // namespace hml

#endif
