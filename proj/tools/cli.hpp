#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spcal {

// Exit codes of the spcal command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // bad flags, config, input files or domain violations
inline constexpr int kExitNumeric = 3;  // solver or series failed to converge

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "SPCAL_OUTPUT_DIR";

// Runs one spcal invocation. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spcal
