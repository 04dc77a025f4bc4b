#pragma once

#include <iosfwd>

namespace qdy::cli {

constexpr int kUsageError = 64;
constexpr int kRuntimeError = 3;

/// Entry point of the qdy command; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qdy::cli
