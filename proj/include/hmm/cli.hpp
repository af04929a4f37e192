#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmm::cli {

/// Exit codes of run().
inline constexpr int exit_ok = 0;
inline constexpr int exit_invalid = 1;
inline constexpr int exit_failed = 2;

/// Entry point of the hmm-entropy tool. args[0] is the program name.
/// Results go to --out (or `out`); diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace hmm::cli
