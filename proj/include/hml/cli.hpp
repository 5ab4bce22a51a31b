#ifndef HML_CLI_HPP
#define HML_CLI_HPP

#include "hml/config.hpp"
#include "hml/oracles.hpp"

#include <ostream>

namespace hml {

// exit codes of the batch front door
enum ExitCode { kOk = 0, kConfigError = 2, kNumericalError = 3, kVerifyFailed = 4 };

struct RunOutput {
    std::string text;                 // human-readable summary
    std::map<std::string, std::string> files; // relative name -> contents
    int exit_code = 0;
};

RunOutput run_describe(const RunConfig& cfg);
RunOutput run_solve_fiber(const RunConfig& cfg, const Vec& base_point);
RunOutput run_sweep(const RunConfig& cfg);
RunOutput run_find_minimal(const RunConfig& cfg);
// the oracle suite; deterministic byte-identical output for a fixed seed
RunOutput run_verify(const RunConfig& cfg);
RunOutput run_report(const std::string& out_dir);

// write output files under dir and print the text
int emit(const RunOutput& out, const std::string& dir, std::ostream& os, bool quiet);

} // namespace hml

#endif
