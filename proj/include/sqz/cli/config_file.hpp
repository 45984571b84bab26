#pragma once

// Experiment configuration files: INI sections with SI quantities carrying explicit unit
// suffixes (nm, mm, um, THz, ps, MHz, ...). Every key is checked; unknown keys and
// malformed values raise Error(config) naming the offending "section.key".

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sqz/jsa_model.hpp"
#include "sqz/montecarlo.hpp"

namespace sqz::cli {

enum class KernelModel {
  physical,   // pump envelope × phase matching
  separable,  // Gaussian product with the pump width on each axis, for checks
};

enum class RunKind { tags, hom, tes, correlation };

enum class ModeWeights {
  filtered,    // Schmidt weights of the filtered JSA
  unfiltered,  // Schmidt weights of the bare JSA
  single,      // one mode
};

struct AnalysisConfig {
  double bin_min_nm = 1560.0;
  double bin_max_nm = 1580.0;
  std::size_t bins = 20;
  // Demultiplexing window on the signal arrival offset.
  double window_start_ps = 0.0;
  double window_end_ps = 0.0;
  bool window_auto = true;
  unsigned side_peaks = 10;
};

struct ExperimentConfig {
  std::filesystem::path path;
  std::string text;  // file contents, hashed into the manifest

  SourceConfig source;
  KernelModel kernel = KernelModel::physical;
  std::size_t grid_points = 256;
  double grid_span_sigma = 5.0;

  RunConfig run;  // run.jsa and the source weights are filled by resolve_run
  RunKind kind = RunKind::tags;
  ModeWeights weights = ModeWeights::filtered;
  CorrelationCase correlation = CorrelationCase::cross_hv;
  TesGeometry tes_geometry = TesGeometry::direct;
  double tes_delay_ps = 0.0;
  double hom_start_ps = -5.0;
  double hom_stop_ps = 5.0;
  double hom_step_ps = 0.25;

  AnalysisConfig analysis;

  // Resolved parameters in file order, for the manifest.
  std::vector<std::pair<std::string, std::string>> echo;
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& origin = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// JSA of the configured source on the configured grid (before filtering).
JointSpectralAmplitude build_source_jsa(const ExperimentConfig& cfg);

/// Fills run.jsa, run.hom_delays_ps and the Schmidt weights per cfg.weights.
RunConfig resolve_run(const ExperimentConfig& cfg, const JointSpectralAmplitude& jsa);

/// Signal demux window: the configured one, or the band of the signal filter (the whole
/// dispersion range when all-pass) plus 5 jitter σ on each side.
std::pair<double, double> demux_window(const ExperimentConfig& cfg);

std::string to_string(RunKind kind);

}  // namespace sqz::cli
