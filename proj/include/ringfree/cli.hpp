#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ringfree::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Subcommands: simulate, detect, correct, baseline, fbp, metrics, export-pgm.
/// Structured output goes to `out` as one JSON object per line, logs to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace ringfree::cli
