#ifndef HML_CONFIG_HPP
#define HML_CONFIG_HPP

#include "hml/minimal.hpp"

#include <istream>
#include <string>

namespace hml {

// Run configuration parsed from the line-oriented sectioned key-value format.
// Every parse failure carries the offending line number.
struct SynthKESpec {
    std::vector<ModeTerm> b0, b1;           // s-monomial / gauss mode sums
    std::vector<double> bm_const;           // per ray
    std::vector<std::vector<ModeTerm>> bm_modes; // per ray
    bool enabled = false;
};

struct RunConfig {
    WeightedFan fan;            // as given in the file
    WeightedFan recentered_fan; // after recentering (used by the pipeline)
    Vec recenter_shift;

    double tau = 20.0;
    double c = 0.5;
    int N = 16;

    enum class PerturbationType { None, Modes, SynthKE } ptype = PerturbationType::None;
    std::vector<ModeTerm> modes;           // gauss/smono modes (fractional centers)
    SynthKESpec synth;

    SolverConfig solver;
    HodgeOptions hodge;

    int grid_points = 9;
    double grid_span = 0.8;   // fraction of Delta_{c tau} covered by the sweep grid
    std::uint64_t seed = 1234;

    // assembled objects
    std::shared_ptr<ToricPotential> rho_tau;  // recentered, at tau
    FieldPtr f;                                // full perturbation (may be null)
    FieldPtr f0, f1;                           // fiber decomposition

    std::vector<Vec> sweep_grid() const;
};

RunConfig parse_config(std::istream& in, const std::string& name = "<config>");
RunConfig load_config(const std::string& path);

// applies tau/c/N/stage/seed overrides and builds the potential objects
void finalize_config(RunConfig& cfg);

} // namespace hml

#endif
