#pragma once

#include <iosfwd>

namespace castkit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMetricError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `castkit` binary. JSON results go to `out` (or the
/// --out file), diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace castkit
