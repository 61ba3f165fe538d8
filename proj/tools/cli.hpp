#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mek::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. args[0] is the program
/// name. Results go to files or `out`; progress and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mek::cli
