#pragma once

#include <ostream>

namespace evseg {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitDegenerate = 4,
};

/// Entry point of the `evseg` command line tool.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evseg
