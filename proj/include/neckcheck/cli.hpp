#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neckcheck {

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 1 validation or config error, 2 I/O error.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace neckcheck
