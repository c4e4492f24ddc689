#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skelgroup::cli {

enum ExitCode : int { kOk = 0, kConfig = 1, kIo = 2, kNumeric = 3, kGradcheck = 4 };

// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skelgroup::cli
