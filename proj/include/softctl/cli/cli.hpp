#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace softctl::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericError = 3 };

/// Environment variable that overrides the default output directory.
inline constexpr const char* kOutDirEnv = "SOFTCTL_OUT_DIR";

struct RunConfig {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string out_dir;
  std::optional<std::string> controller;
  std::optional<std::string> checkpoint;
  std::optional<std::string> dataset;
  std::optional<std::string> cache_dir;
  std::vector<std::string> compare;
  std::optional<int> trajectories;  // collect
  std::optional<int> steps;         // collect
  int verbosity = 1;
};

/// Output directory: --out, else $SOFTCTL_OUT_DIR, else "out".
std::string resolve_out_dir(const std::string& flag);

int cmd_collect(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_calibrate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand; returns the process exit code.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace softctl::cli
