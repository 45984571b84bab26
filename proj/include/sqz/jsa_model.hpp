#pragma once

// Two-photon joint spectral amplitude: construction from a source configuration,
// spectral filtering, Schmidt decomposition, and the figures of merit built on it
// (effective mode number K, K_ABS, marginal overlap, single-pair HOM curve).
//
// Frequencies are angular (rad/s) throughout; wavelengths are in metres.

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sqz/spectral_filter.hpp"

namespace sqz {

using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

struct FrequencyGrid {
  std::size_t n_signal = 256;
  std::size_t n_idler = 256;
  double signal_min = 0.0;
  double signal_max = 0.0;
  double idler_min = 0.0;
  double idler_max = 0.0;

  void validate() const;

  double signal_step() const { return (signal_max - signal_min) / static_cast<double>(n_signal - 1); }
  double idler_step() const { return (idler_max - idler_min) / static_cast<double>(n_idler - 1); }
  double signal_at(std::size_t j) const { return signal_min + static_cast<double>(j) * signal_step(); }
  double idler_at(std::size_t k) const { return idler_min + static_cast<double>(k) * idler_step(); }

  /// Same sampling on both axes, so Ψ(ω_1, ω_2) and Ψ(ω_2, ω_1) live on the same points.
  bool symmetric() const;

  /// Square grid of n points per axis over [center - half_span, center + half_span].
  static FrequencyGrid centered(double center, double half_span, std::size_t n);

  friend bool operator==(const FrequencyGrid&, const FrequencyGrid&) = default;
};

struct SourceConfig {
  double pump_center_wavelength = 785e-9;
  double pump_fwhm_bandwidth = 5.35e-9;  // intensity FWHM
  double crystal_length = 2e-3;
  double poling_period = 46.55e-6;
  double group_index_pump = 1.860;
  double group_index_signal = 1.815;
  double group_index_idler = 1.905;
  // λ_idler − λ_signal at the phase-matched point; 0 is degenerate.
  double signal_center_offset = 0.0;
  // Quadratic spectral phase of the pump, φ(Δω) = chirp·Δω²/2, in s².
  double pump_chirp = 0.0;
  // Descriptive only; transverse physics is not modelled.
  double pump_waist = 50e-6;
  double confocal_parameter = 10e-3;

  void validate() const;

  double pump_omega() const;
  /// RMS width of the pump *intensity* spectrum in angular frequency.
  double pump_sigma() const;
  /// Phase-matched signal/idler angular frequencies (sum = pump center).
  std::pair<double, double> center_omegas() const;
};

/// Default sampling: n×n bins spanning ±span_in_sigma pump widths (pump_sigma)
/// around the degeneracy point ω_p/2.
FrequencyGrid default_grid(const SourceConfig& cfg, std::size_t n = 256, double span_in_sigma = 5.0);

/// α(ω_s + ω_i) = exp(−(Σ − ω_p)² / (4σ_p²)) · exp(i·chirp·(Σ − ω_p)²/2), so |α|² is a
/// Gaussian of standard deviation σ_p and intensity FWHM equal to the configured bandwidth.
class PumpEnvelope {
 public:
  explicit PumpEnvelope(const SourceConfig& cfg);
  std::complex<double> operator()(double omega_sum) const;
  double center() const { return omega_p_; }
  double sigma() const { return sigma_; }

 private:
  double omega_p_;
  double sigma_;
  double chirp_;
};

/// sinc(ΔkL/2)·exp(iΔkL/2) with Δk expanded to first order (group indices) about the
/// phase-matched point.
class PhaseMatching {
 public:
  explicit PhaseMatching(const SourceConfig& cfg);
  std::complex<double> operator()(double omega_s, double omega_i) const;
  /// Δk in rad/m.
  double delta_k(double omega_s, double omega_i) const;

 private:
  double omega_s0_;
  double omega_i0_;
  double inv_v_pump_;
  double inv_v_signal_;
  double inv_v_idler_;
  double length_;
};

/// Throws Error(degenerate_envelope) when the grid misses the pump band.
PumpEnvelope build_pump_envelope(const SourceConfig& cfg, const FrequencyGrid& grid);
PhaseMatching build_phase_matching(const SourceConfig& cfg, const FrequencyGrid& grid);

struct JointSpectralAmplitude {
  FrequencyGrid grid;
  ComplexMatrix amplitude;  // [signal bin][idler bin]

  /// Σ|Ψ|²·Δω_s·Δω_i
  double norm_squared() const;
  RealMatrix intensity() const;
  void validate() const;
};

/// Wraps a sampled kernel, normalising it to unit L² norm. Throws on non-finite
/// entries (numeric) or a zero kernel (empty_overlap).
JointSpectralAmplitude make_jsa(const FrequencyGrid& grid, ComplexMatrix amplitude);

JointSpectralAmplitude build_jsa(const SourceConfig& cfg, const FrequencyGrid& grid);

struct SchmidtDecomposition {
  FrequencyGrid grid;
  std::vector<double> weights;  // descending, Σ = 1
  ComplexMatrix signal_modes;   // column n is ψ_n on the signal axis
  ComplexMatrix idler_modes;    // column n is φ_n on the idler axis

  std::size_t rank() const { return weights.size(); }
  /// Σ √λ_n ψ_n(ω_s) φ_n(ω_i), using at most `modes` terms (0 = all).
  ComplexMatrix reconstruct(std::size_t modes = 0) const;
};

SchmidtDecomposition schmidt_decompose(const JointSpectralAmplitude& jsa);

/// Weights only, for a bare matrix with uniform quadrature (e.g. √counts of a histogram).
std::vector<double> schmidt_weights(const ComplexMatrix& matrix);
std::vector<double> schmidt_weights(const RealMatrix& matrix);

/// K = (Σ λ_n²)⁻¹
double effective_mode_number(std::span<const double> weights);
double effective_mode_number(const SchmidtDecomposition& dec);

double k_abs(const JointSpectralAmplitude& jsa);
/// K_ABS of an arbitrary non-negative amplitude matrix with uniform bins.
double k_abs(const RealMatrix& abs_amplitude);

struct FilterResult {
  JointSpectralAmplitude jsa;
  // Intensity transmission of each pre-filter Schmidt mode, in weight order.
  std::vector<double> signal_mode_transmission;
  std::vector<double> idler_mode_transmission;
  // λ-weighted mean transmission of modes n ≥ 2.
  double signal_higher_order_transmission = 0.0;
  double idler_higher_order_transmission = 0.0;
};

FilterResult apply_filter(const JointSpectralAmplitude& jsa, const SpectralFilter& filter_signal,
                          const SpectralFilter& filter_idler);

struct Spectrum {
  std::vector<double> axis;  // rad/s, uniform
  std::vector<double> density;
  double step() const { return axis.size() > 1 ? axis[1] - axis[0] : 0.0; }
};

/// Row/column marginals of a joint spectral probability on `grid`, each normalised
/// to Σ density·Δω = 1.
std::pair<Spectrum, Spectrum> marginal_spectra(const RealMatrix& jsp, const FrequencyGrid& grid);

/// |∫ √a(ω) √b(ω) dω|² for unit-normalised intensity spectra on the same axis.
double overlap_integral(const Spectrum& a, const Spectrum& b);

/// FWHM of a spectrum in wavelength (m), by linear interpolation at half maximum.
double spectrum_fwhm_wavelength(const Spectrum& s);
/// Wavelength (m) of the spectrum maximum.
double spectrum_peak_wavelength(const Spectrum& s);

struct HomCurve {
  std::vector<double> delays;  // s
  std::vector<double> coincidence_probability;
  /// 1 − min(P_c) / baseline, baseline = mean of the outer 20 % of points on each side.
  double visibility() const;
};

/// Single-pair coincidence probability behind a balanced beam splitter versus the
/// relative delay, P_c = ½[1 − Re ∬ Ψ(ω1,ω2)Ψ*(ω2,ω1) e^{−i(ω1−ω2)Δt}].
HomCurve hom_curve(const JointSpectralAmplitude& jsa, std::span<const double> delays);

/// Delay (s) that minimises the single-pair coincidence probability on [lo, hi]: a coarse
/// scan followed by golden-section refinement.
double hom_dip_delay(const JointSpectralAmplitude& jsa, double lo, double hi);

}  // namespace sqz
