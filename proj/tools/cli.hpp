#pragma once

#include <iosfwd>
#include <string>

namespace hbt::cli {

enum ExitCode : int { kOk = 0, kValidationError = 1, kRuntimeError = 2 };

/// Runs one command. Diagnostics go to `err`, short progress notes to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Parses "10ms", "4us", "65ps", "1s", "100ns" or a bare number (ns).
double parse_time_ns(const std::string& text);

}  // namespace hbt::cli
