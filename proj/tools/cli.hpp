#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rtn::cli {

/// Runs the rtn command line with argv-style arguments (args[0] is the
/// program name). Returns the process exit code:
/// 0 success, 1 usage/config error, 2 numerical failure, 3 I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rtn::cli
