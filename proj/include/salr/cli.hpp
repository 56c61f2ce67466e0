#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace salr {

// Exit codes of the salr binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitDomain = 4;
inline constexpr int kExitVerification = 5;

/// Runs one salr invocation. `args` excludes the program name. Reports go to
/// `out` as key=value lines, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace salr
