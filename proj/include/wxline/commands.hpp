#pragma once

#include <iosfwd>
#include <stop_token>

namespace wxline::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Parses argv and runs the selected subcommand until it finishes or `stop`
// fires. Returns the process exit code.
int run(int argc, const char* const* argv, std::stop_token stop, std::ostream& out, std::ostream& err);

}  // namespace wxline::cli
