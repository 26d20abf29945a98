#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tmaxbayes::cli {

/// Exit statuses of the command-line driver.
enum Status : int { kOk = 0, kInputFailure = 1, kNumericalFailure = 2 };

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tmaxbayes::cli
