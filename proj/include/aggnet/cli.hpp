#pragma once

#include <string>
#include <vector>

namespace aggnet::cli {

// Full command-line entry point. Returns the process exit code:
//   0 success, 1 usage error, 2 data or file-format error, 3 numerical failure.
int run(int argc, const char* const* argv);

// Test-friendly overload; args start at the subcommand (no program name).
int run(const std::vector<std::string>& args);

}  // namespace aggnet::cli
