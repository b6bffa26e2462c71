#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace islt {

constexpr const char* kVersion = "0.1.0";

// Parses argv, runs one subcommand and returns the exit code:
// 0 success, 1 validation error or bad usage, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace islt
