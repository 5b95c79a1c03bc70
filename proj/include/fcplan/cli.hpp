#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fcplan/mpc.hpp"

namespace fcplan {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,        // config, IO or argument errors
  kExitNotConverged = 2, // some MPC step did not end Converged
  kExitCheckFailed = 3,  // a self-check failed
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Row schema, scaling and bounds as pretty-printed JSON.
std::string constraints_json(const ScenarioConfig& cfg);

}  // namespace fcplan
