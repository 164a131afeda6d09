// Command-line entry point.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace helio::cli {

/// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

/// Parses `args` (without the program name) and runs one subcommand.
/// Failures print a single "helio: ..." line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies HELIO_THREADS, if set, as the thread cap. Throws UsageError for a
/// value that is not a positive integer.
void apply_thread_cap();

}  // namespace helio::cli
