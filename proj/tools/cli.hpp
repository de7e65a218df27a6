#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace exprag::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

// Runs one `exprag` invocation. args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace exprag::cli
