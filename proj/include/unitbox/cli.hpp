#pragma once

#include <string>
#include <vector>

namespace unitbox {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `unitbox` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace unitbox
