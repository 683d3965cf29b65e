#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace simfuse::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `simfuse` command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace simfuse::cli
