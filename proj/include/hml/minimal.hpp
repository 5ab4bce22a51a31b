#ifndef HML_MINIMAL_HPP
#define HML_MINIMAL_HPP

#include "hml/solver.hpp"

#include <map>

namespace hml {

// log Vol(F^{-1}(x)) under the toric part of the metric, with two routes:
// the determinant identity u = (1/2) log det Hess(rho0) + n log(2 pi) +
// (n/2) log 2, and direct fiber-volume quadrature.
class VolumeProfile {
  public:
    VolumeProfile(const BasePotential* base, FieldPtr f0, double scale)
        : base_(base), f0_(std::move(f0)), scale_(scale) {}

    double value(const Vec& x) const;         // determinant identity route
    Vec gradient(const Vec& x) const;
    Mat hessian(const Vec& x) const;
    double value_by_quadrature(const Vec& x, int N) const;

    const BasePotential& base() const { return *base_; }
    double scale() const { return scale_; }
    const FieldPtr& f0() const { return f0_; }

  private:
    Mat hess_rho0(const Vec& x) const;
    // jets of rho0_hat entries to the given extra order
    Jet rho0_jet(const Vec& x, int order) const;

    const BasePotential* base_;
    FieldPtr f0_;
    double scale_;
};

struct MinimizeResult {
    Vec x0;
    double u_min = 0.0;
    double boundary_gap = 0.0;   // min over boundary samples of u - u(x0)
    bool gap_at_least_one = false;
    int iterations = 0;
};

MinimizeResult minimize_volume(const VolumeProfile& u, double region_c, int boundary_samples = 64);

struct CohomologyPoint {
    Vec x;
    Vec klass;           // [alpha] in the [dtheta_j] period basis
    double dalpha = 0.0; // closedness diagnostic
    double residual = 0.0;
    double h_norm = 0.0;
};

// Shared context for pipeline runs: owns the decomposed perturbation, solves
// fibers with warm starts, and caches solutions per base point.
class PipelineContext {
  public:
    PipelineContext(const BasePotential* base, FieldPtr f0, FieldPtr f1, double region_c,
                    int N, SolverConfig cfg)
        : base_(base),
          f0_(std::move(f0)),
          f1_(std::move(f1)),
          region_c_(region_c),
          cfg_(std::move(cfg)),
          flow_(base_, f0_, f1_),
          grid_(std::make_shared<TorusGrid>(base_->dim(), N)) {}

    const BasePotential& base() const { return *base_; }
    const FieldPtr& f0() const { return f0_; }
    const FieldPtr& f1() const { return f1_; }
    double region_c() const { return region_c_; }
    double tau() const { return base_->tau(); }
    const std::shared_ptr<const TorusGrid>& grid() const { return grid_; }
    const SolverConfig& config() const { return cfg_; }
    const FlowField& flow() const { return flow_; }

    // solve the H-minimal fiber over x (warm started when possible)
    struct Solved {
        ContinuationState state;
        GeometrySample sample;
    };
    const Solved& solve_fiber(const Vec& x);

    CohomologyPoint psi(const Vec& x);

  private:
    const BasePotential* base_;
    FieldPtr f0_, f1_;
    double region_c_;
    SolverConfig cfg_;
    FlowField flow_;
    std::shared_ptr<const TorusGrid> grid_;
    std::map<std::vector<double>, Solved> cache_;
    bool have_warm_ = false;
    Vec warm_h_;
    Vec warm_x_;
};

struct DPsiCheck {
    Mat formula;      // columns: class of -iota(V_beta) Ric for basis classes
    Mat fd;           // finite differences of Psi across neighboring fibers
    double difference = 0.0; // operator-norm proxy of (formula - fd)
};

// formula route uses the solved fiber over x; ricci_lambda injects a
// synthetic Einstein ambient Ric = lambda G
DPsiCheck dpsi_check(PipelineContext& ctx, const Vec& x, double fd_step = 1e-3,
                     std::optional<double> ricci_lambda = std::nullopt);

enum class MinimalStatus { Minimal, NotMinimalAtRoot, RootNotFound, ExitedRegion };

struct MinimalTorusReport {
    MinimalStatus status = MinimalStatus::RootNotFound;
    Vec x0;                  // volume minimizer (initialization)
    Vec x1;                  // root of Psi
    double psi_norm = 0.0;
    double sup_alpha = 0.0;
    double dstar_alpha = 0.0;
    double dalpha = 0.0;
    double class_norm = 0.0;
    double h_norm = 0.0;
    double interior_margin = 0.0; // -max_m q_m(x1) at scale c tau
    double boundary_gap = 0.0;
    LagClass classification = LagClass::None;
    int iterations = 0;
    std::vector<Vec> iterates;
};

struct FindMinimalOptions {
    double psi_tol = 1e-8;
    int max_iterations = 30;
    double fd_step = 1e-3;
};

MinimalTorusReport find_minimal(PipelineContext& ctx, const FindMinimalOptions& opt = {});

} // namespace hml

#endif
