#pragma once

#include <iosfwd>

#include "sentimill/cli/config.hpp"

namespace sentimill::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // the operation ran and failed
inline constexpr int kExitUsage = 2;    // bad arguments, config or input files

/// Error codes that mean the invocation itself was wrong.
bool is_usage_error(const std::string& code);

/// The whole command line front end. Human output goes to `out`, logs to
/// standard error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env = process_env());

}  // namespace sentimill::cli
