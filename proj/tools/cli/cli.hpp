#pragma once

#include <string>
#include <vector>

namespace orbit::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kPartial = 1,  // dead letters, failed categories or invalid records present
  kConfigError = 2,
  kFatal = 3,
};

/// Parses `args` (argv without the program name) and runs one subcommand.
/// Logs and the final JSON status line go to stderr, summaries to stdout.
int run_cli(const std::vector<std::string>& args);

}  // namespace orbit::cli
