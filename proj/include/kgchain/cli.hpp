#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kgchain::cli {

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kGeneric = 1, kConfig = 2, kProvider = 3 };

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgchain::cli
