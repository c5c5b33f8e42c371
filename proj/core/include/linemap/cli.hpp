#pragma once

#include <string>
#include <vector>

namespace linemap::cli {

// Exit codes: 0 success, 2 config error, 3 data error, 4 solver failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitSolver = 4;

// Batch experiment driver. `args` excludes the program name.
// Subcommands: simulate, solve, ab-degeneracy, fim, cluster.
int run(const std::vector<std::string>& args);

}  // namespace linemap::cli
