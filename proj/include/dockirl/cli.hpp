#pragma once

#include <iosfwd>

namespace dockirl {

/// Exit codes returned by run_cli.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

/// Parses argv and executes one subcommand:
///   gen-data, train, eval, render, oracle-check.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dockirl
