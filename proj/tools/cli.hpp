#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ruleflow::cli {

/// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kDataError = 3;
inline constexpr int kRuntimeError = 4;

/// Runs one invocation; `args` excludes the program name. Data goes to
/// `out`, logs and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ruleflow::cli
