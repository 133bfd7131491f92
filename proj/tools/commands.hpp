#pragma once

#include <string>
#include <vector>

namespace fqr::cli {

// Parses and dispatches one invocation; `args` excludes the program name.
// Returns the process exit code (0 only when the output artifact was written).
int run_cli(const std::vector<std::string>& args);

}  // namespace fqr::cli
