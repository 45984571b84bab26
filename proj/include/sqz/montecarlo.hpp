#pragma once

// Synthetic experiment runs: pair emission, SNSPD time tags through the time-of-flight
// spectrometer, HOM scans with TES-style counting, and photon-number records.
//
// Pulses are processed in fixed blocks, each with its own RNG derived from
// (seed, purpose, block), so results do not depend on the worker count.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sqz/jsa_model.hpp"
#include "sqz/photon_stats.hpp"
#include "sqz/spectral_filter.hpp"
#include "sqz/tag_pipeline.hpp"
#include "sqz/tof_spectrometer.hpp"

namespace sqz {

inline constexpr std::uint64_t kPulsesPerBlock = 1u << 14;
/// Largest pair number per pulse that uses the exact beam-splitter table.
inline constexpr unsigned kMaxFockPairs = 12;

enum class PairStatistics {
  thermal,      // independent geometric pair numbers per Schmidt mode
  single_pair,  // at most one pair per pulse, P(1) = min(1, ⟨n⟩)
};

struct RunConfig {
  double repetition_rate_hz = 76e6;
  std::uint64_t n_pulses = 1'000'000;
  SqueezerSpec source;
  PairStatistics statistics = PairStatistics::thermal;
  // Spectral sampling and single-pair HOM overlap. Without it, pairs carry no frequency.
  std::optional<JointSpectralAmplitude> jsa;
  SpectralFilter filter_signal = SpectralFilter::all_pass();
  SpectralFilter filter_idler = SpectralFilter::all_pass();
  DetectorModel detector_signal;
  DetectorModel detector_idler;
  // Latency is the arrival offset of a τ = c_0 photon within its clock period.
  SpectrometerPath path_signal{signal_path_model(), 2000.0, Branch::above_fold};
  SpectrometerPath path_idler{idler_path_model(), 2000.0, Branch::above_fold};
  double idler_delay_ps = 180000.0;
  // One SNSPD channel with the idler delayed (true) or separate channels 0 and 1.
  bool time_multiplexed = true;
  std::array<double, 2> tes_efficiencies{0.95, 0.73};
  double background_rate_per_pulse = 0.0;  // mean stray photons per TES per pulse
  std::uint64_t rng_seed = 0;
  std::vector<double> hom_delays_ps;
  // Interpret hom_delays_ps relative to the single-pair dip of the filtered JSA.
  bool hom_delays_relative_to_dip = true;

  void validate() const;
  double clock_period_ps() const { return 1e12 / repetition_rate_hz; }
};

struct PairEmission {
  std::uint64_t pulse = 0;
  std::uint32_t mode = 0;
  double omega_signal = 0.0;  // rad/s, NaN without a JSA
  double omega_idler = 0.0;
};

struct PairSourceRun {
  std::uint64_t n_pulses = 0;
  std::vector<PairEmission> emissions;  // pulse ordered
  std::vector<std::uint64_t> pairs_per_pulse;  // histogram, index = pair count
  std::uint64_t multi_pair_pulses() const;
};

/// Per-mode pair numbers are thermal with μ_n from per_mode_means. Each pair's (ω_s, ω_i) is
/// drawn from the full |Ψ|²; the mode index is bookkeeping only.
PairSourceRun simulate_pair_source(const RunConfig& cfg);

enum class TagOrigin : std::uint8_t { signal, idler, dark };

struct TagRun {
  TagStream stream;
  std::vector<TagOrigin> origin;  // ground truth, parallel to stream.records
  std::uint64_t emitted_pairs = 0;
  std::uint64_t deadtime_losses = 0;
};

/// Filter (Bernoulli on T(λ)), detect (Bernoulli on efficiency), time-stamp
/// (latency + τ(λ) − c_0 + Gaussian jitter), add dark counts, apply dead time.
TagRun simulate_tag_run(const RunConfig& cfg);

struct HomRun {
  HomScan scan;
  BackgroundRun background;
  std::vector<double> single_pair_coincidence;  // model P_c per delay
  std::uint64_t single_pair_pulses = 0;
  std::uint64_t multi_pair_pulses = 0;
  std::uint64_t truncated_pulses = 0;  // more than kMaxFockPairs pairs
  // Per delay: coincidences from pulses with exactly one pair and with two or more.
  std::vector<double> single_pair_coincidences;
  std::vector<double> multi_pair_coincidences;
  double dip_delay_ps = 0.0;  // model dip position added to the configured delays
};

/// HOM scan with TES counting. cfg.jsa (after cfg filters) sets the single-pair overlap at each
/// delay; each pulse is treated as indistinguishable with probability 1 − 2P_c(Δt). ⟨n⟩ is the
/// pair number reaching the beam splitter. A pump-blocked background run of n_pulses is included.
HomRun simulate_hom_run(const RunConfig& cfg);

struct TesRecord {
  std::uint64_t clock_index = 0;
  std::uint32_t n_c = 0;
  std::uint32_t n_d = 0;
};

enum class TesGeometry {
  direct,  // c = signal arm, d = idler arm
  hom,     // c, d = beam-splitter outputs at the given delay
};

std::vector<TesRecord> simulate_tes_run(const RunConfig& cfg, TesGeometry geometry = TesGeometry::direct,
                                        double delay_ps = 0.0);

enum class CorrelationCase {
  cross_hv,  // start = signal arm, stop = idler arm
  auto_hh,   // signal arm split on a 50/50 coupler
  auto_cc,   // one HOM output port (at zero delay) split on a 50/50 coupler
};

struct CorrelationRun {
  TagStream start;  // channel 0
  TagStream stop;   // channel 1
  double zero_delay_ps = 0.0;  // nominal stop − start offset of same-pulse clicks
};

/// Click-detector (SNSPD) tags for g² by the peak-ratio method. Uses detector_signal for
/// start and detector_idler for stop.
CorrelationRun simulate_correlation_run(const RunConfig& cfg, CorrelationCase which);

void write_tes_csv(std::ostream& out, const std::vector<TesRecord>& records);

}  // namespace sqz
