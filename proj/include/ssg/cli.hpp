#pragma once

#include <iosfwd>

namespace ssg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitRefused = 4;

/// Entry point of the `ssgraph` tool. Errors are reported on `err` and mapped to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssg
