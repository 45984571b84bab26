#pragma once

// Time-tag processing: polarisation demultiplexing, time-of-flight spectra, joint
// spectral histograms, peak-ratio g², HOM visibilities and rate summaries.
//
// Tags carry an absolute integer time in ps; clock index and offset are derived from
// the stream's clock period so a round trip through the binary format is exact.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sqz/tof_spectrometer.hpp"

namespace sqz {

struct TagRecord {
  std::uint16_t channel = 0;
  std::uint16_t flags = 0;
  std::uint64_t time_ps = 0;      // since run start
  std::uint64_t clock_index = 0;  // pump pulse ordinal
  double time_offset_ps = 0.0;    // t − clock_index·period, in [0, period)
};

TagRecord make_tag(std::uint16_t channel, std::uint64_t time_ps, double clock_period_ps, std::uint16_t flags = 0);

struct TagStream {
  double clock_period_ps = 1e12 / 76e6;
  double duration_s = 0.0;
  std::map<std::uint16_t, std::string> channel_names;
  std::vector<TagRecord> records;  // time ordered

  void validate() const;
  /// Keeps only records of one channel.
  TagStream channel(std::uint16_t id) const;
  std::uint64_t n_pulses() const;
};

// ---- demultiplexing -------------------------------------------------------

struct DemuxConfig {
  std::uint16_t channel = 0;
  double window_start_ps = 0.0;   // signal window within the clock period
  double window_end_ps = 0.0;
  double idler_delay_ps = 180000.0;
  std::uint16_t signal_channel = 0;
  std::uint16_t idler_channel = 1;
};

struct DemuxResult {
  TagStream signal;
  TagStream idler;  // times shifted back by the idler delay
  std::uint64_t discarded = 0;
};

/// Throws Error(config) when the signal and delayed windows overlap modulo the period.
DemuxResult demux_polarization(const TagStream& stream, const DemuxConfig& cfg);

// ---- spectra --------------------------------------------------------------

struct SpectrometerPath {
  DispersionModel model;
  // Arrival offset of a τ = c_0 photon after its clock edge. Must keep the whole band inside
  // one period: tags are matched by clock index and inverted from their in-period offset.
  double latency_ps = 0.0;
  Branch branch = Branch::above_fold;
};

/// Uniform wavelength bin edges (nm).
std::vector<double> uniform_edges(double lo_nm, double hi_nm, std::size_t bins);

struct SinglesSpectrum {
  std::vector<double> edges_nm;
  std::vector<std::uint64_t> counts;
  std::uint64_t binned = 0;
  std::uint64_t alias = 0;      // physical delay but wavelength outside the bins
  std::uint64_t discarded = 0;  // below the fold minimum or beyond the branch range
};

SinglesSpectrum singles_spectrum(std::span<const TagRecord> tags, const SpectrometerPath& path,
                                 const std::vector<double>& edges_nm);

/// Wavelength of a tag on its path, or nullopt when the delay cannot be inverted.
std::optional<double> tag_wavelength(const TagRecord& tag, const SpectrometerPath& path);

struct Histogram2D {
  std::vector<double> edges_signal_nm;
  std::vector<double> edges_idler_nm;
  Eigen::MatrixXd counts;  // integer valued, [signal bin][idler bin]

  void validate() const;
  double total() const { return counts.sum(); }
};

struct JointSpectrumResult {
  Histogram2D histogram;
  std::uint64_t coincident_pulses = 0;
  std::uint64_t multi_tag_pulses = 0;  // contributed all pairings
  std::uint64_t pairings = 0;
  std::uint64_t unbinned_pairings = 0;
};

/// Same-clock-index coincidences. Throws Error(stream_alignment) when the clock periods
/// differ or the clock ranges do not overlap.
JointSpectrumResult joint_spectrum(const TagStream& signal, const TagStream& idler, const SpectrometerPath& signal_path,
                                   const SpectrometerPath& idler_path, const std::vector<double>& edges_signal_nm,
                                   const std::vector<double>& edges_idler_nm);

// ---- g² -------------------------------------------------------------------

struct G2Estimate {
  double g2 = 0.0;
  double sigma = 0.0;
  double zero_peak = 0.0;
  double side_mean = 0.0;
  std::vector<double> peak_areas;  // index k + n_side for peak k ∈ [−n_side, n_side]
};

/// Start-stop histogram integrated over full-period windows centred on k·T + zero_delay_ps.
/// σ = g²·√(1/A_0 + 1/ΣA_side). Throws Error(insufficient_statistics) on empty side peaks.
G2Estimate g2_peak_ratio(std::span<const TagRecord> start, std::span<const TagRecord> stop, double clock_period_ps,
                         unsigned n_side_peaks, double zero_delay_ps = 0.0);

// ---- HOM ------------------------------------------------------------------

struct HomScan {
  std::vector<double> delays_ps;
  std::vector<double> coincidences;
  std::vector<double> pulses;
  std::vector<double> singles_c;
  std::vector<double> singles_d;
};

struct BackgroundRun {
  double pulses = 0.0;
  double coincidences = 0.0;
  double singles_c = 0.0;
  double singles_d = 0.0;
};

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

struct HomAnalysis {
  Estimate raw;
  Estimate background_subtracted;
  Estimate accidental_corrected;
  // Per-pulse coincidence probability at each correction level.
  std::vector<double> raw_curve;
  std::vector<double> background_subtracted_curve;
  std::vector<double> corrected_curve;
  std::vector<double> accidentals;  // per pulse
};

/// Accidentals per pulse: r_ph,c·r_bg,d + r_bg,c·r_ph,d, with r_bg from the background run
/// and r_ph = singles per pulse − r_bg. Throws Error(baseline) when the background-subtracted
/// baseline is not significantly above zero.
HomAnalysis hom_analysis(const HomScan& scan, const BackgroundRun& background);

// ---- rates ----------------------------------------------------------------

struct CountSummary {
  std::map<std::uint16_t, Estimate> singles_hz;
  Estimate coincidence_hz;
  Estimate background_coincidence_hz;
  Estimate accidental_hz;
  double duration_s = 0.0;
};

/// Rates with Poisson σ. Coincidences are pulses with at least one tag in each of a and b.
CountSummary count_summary(const TagStream& a, const TagStream& b, const TagStream* background_a = nullptr,
                           const TagStream* background_b = nullptr);

}  // namespace sqz
