#pragma once

// Subcommands of the sqz tool. Each writes manifest.json first (the only file with a
// timestamp), then its data files; data files depend only on the inputs and the seed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sqz/stats_uncertainty.hpp"

namespace sqz::cli {

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;  // overrides run.seed
  std::filesystem::path out;
  std::filesystem::path input;  // calibration CSV (calibrate) or run directory (analyze)
  std::size_t resamples = kDefaultResamples;
  std::string mode;  // analyze: joint | hom | g2 | singles
  unsigned threads = 0;
  // theory
  double mean_min = 0.01;
  double mean_max = 2.0;
  std::size_t points = 100;
};

void cmd_jsa(const CommandOptions& opt);
void cmd_calibrate(const CommandOptions& opt);
void cmd_simulate(const CommandOptions& opt);
void cmd_analyze(const CommandOptions& opt);
void cmd_theory(const CommandOptions& opt);

/// Git blob hash, SHA-1 over "blob <size>\0<content>", lowercase hex.
std::string git_blob_hash(const std::string& content);

}  // namespace sqz::cli
