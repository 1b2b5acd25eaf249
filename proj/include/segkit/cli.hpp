#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace segkit::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitValidation = 4;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kConfigEnv = "SEGKIT_CONFIG";

// Runs one command line (args[0] is the program name). Summaries go to
// `out`, progress and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace segkit::cli
