#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace affect::cli {

// Exit codes are part of the public interface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Relative output paths are resolved against this directory when set.
inline constexpr const char* kOutputRootEnv = "AFFECT_OUTPUT_ROOT";

/// argv[0] is the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace affect::cli
