#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace robustpred::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kValidation = 2,  // bad flags, config keys, shapes, single-class gate labels
  kNumerical = 3,
  kIo = 4,          // unreadable or malformed files
};

/// Runs `robustpred <subcommand> ...`. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace robustpred::cli
