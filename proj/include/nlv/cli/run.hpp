#pragma once
// Experiment commands behind the nlv binary.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlv/cli/config.hpp"

namespace nlv::cli {

struct RunArgs {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out = "nlv-out";
  std::optional<std::uint64_t> seed;
  bool fast = false;
};

struct RunResult {
  int status = 0;  // 0 pass, 1 invariant failure, 2 config error
  std::vector<std::string> failed;
  std::vector<std::string> files;  // relative to the output directory
  nlohmann::json summary;
  std::string message;
};

/// Reads the config, runs the command and writes artifacts plus manifest.json.
/// Config problems give status 2 with a line-precise message.
RunResult run(const RunArgs& args);

/// Runs an already loaded config into `out`.
RunResult run_config(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace nlv::cli
