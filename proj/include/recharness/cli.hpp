#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace recharness::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitExperimentError = 1;
inline constexpr int kExitConfigError = 2;

inline constexpr const char* kSubcommands[] = {"prepare-corpus", "fit-baseline", "build-memory",
                                               "eval-rank",      "probe-bias",   "eval-ctr",
                                               "export-ft"};

struct Options {
  std::string subcommand;
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  bool dry_run = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

/// Runs one subcommand; returns the process exit status.
int run(const Options& options, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to run().
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace recharness::cli
