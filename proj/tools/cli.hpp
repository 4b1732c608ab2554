#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scarlab/config.hpp"

namespace scarlab::cli {

/// Exit codes: 0 success, 1 usage or input error, 2 solver did not converge.
enum ExitCode { ok = 0, input_error = 1, not_converged = 2 };

int cmd_solve(const ExperimentConfig& config, std::ostream& log);
int cmd_dos(const ExperimentConfig& config, std::ostream& log);
int cmd_scars(const ExperimentConfig& config, std::ostream& log);
int cmd_pinning(const ExperimentConfig& config, std::ostream& log);
int cmd_classical(const ExperimentConfig& config, std::ostream& log);
int cmd_poincare(const ExperimentConfig& config, std::ostream& log);
int cmd_resonances(const ExperimentConfig& config, std::ostream& log);

/// Resolves `p` against the output directory unless it is absolute.
std::filesystem::path in_out(const ExperimentConfig& config, const std::string& p);

/// Full command line driver; messages go to `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scarlab::cli
