#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sgm::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kParseError = 2;
inline constexpr int kResourceLimit = 3;
inline constexpr int kSolverFailure = 4;

/// Runs the `sgm` command line in-process. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgm::cli
