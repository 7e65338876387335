#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace figo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `figo` invocation. args excludes the program name. Data goes to
/// `out`; logs, usage text and JSON error records go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace figo::cli
