#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace statconsist::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (without the program name). Returns the
// process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "8/255" or a decimal literal.
double parse_fraction(const std::string& text);

}  // namespace statconsist::cli
