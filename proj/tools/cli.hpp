#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace morallens::cli {

/// Runs one invocation. `args` excludes the program name. Data goes to
/// `out`, diagnostics to `err`. Returns 0 ok, 1 runtime failure, 2 usage or
/// input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace morallens::cli
