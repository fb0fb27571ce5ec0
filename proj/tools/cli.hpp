#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace amar::cli {

/// Runs one command line (without the program name). Returns the process exit
/// code: 0 success, 1 config, 2 I/O, 3 backend, 4 validation. Failures print
/// one JSON line {"error": {...}} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amar::cli
