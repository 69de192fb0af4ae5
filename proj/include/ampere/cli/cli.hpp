#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ampere::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs one command. `args` excludes the program name. Usage problems exit 1
// with the usage text on `err`; bad or missing input data exits 2.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ampere::cli
