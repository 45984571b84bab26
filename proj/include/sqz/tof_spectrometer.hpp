#pragma once

// Dispersive-fibre time-of-flight spectrometer. Wavelengths in nm, delays in ps,
// matching the units calibration data come in.

#include <array>
#include <cstddef>
#include <span>
#include <string>

namespace sqz {

struct CalibrationPoint {
  double wavelength_nm;
  double delay_ps;
};

/// Group delay τ(λ) = Σ c_k x^k with x = λ − reference_nm. c_0 is the delay at the
/// reference, so the absolute fibre transit time can be dropped.
struct DispersionModel {
  double reference_nm = 1319.0;
  std::array<double, 4> coeffs{};  // ps, ps/nm, ps/nm², ps/nm³
  double zero_dispersion_nm = 1319.0;
  double range_min_nm = 1100.0;
  double range_max_nm = 1800.0;
  // Fit diagnostics; zero for analytic models.
  double residual_rms_ps = 0.0;
  double zero_dispersion_sigma_nm = 0.0;  // 1σ, delta method
  std::size_t n_points = 0;

  void validate() const;
  double delay(double wavelength_nm) const;      // no range check
  double dispersion(double wavelength_nm) const; // dτ/dλ, ps/nm
  double min_delay() const { return delay(zero_dispersion_nm); }
  /// 95 % confidence half-width on λ_0 (normal approximation).
  double zero_dispersion_ci95_nm() const { return 1.959963984540054 * zero_dispersion_sigma_nm; }
};

/// Signal-path model: fold at 1319 nm and 24.4 ps/nm at 1570 nm.
DispersionModel signal_path_model();
/// Idler path: same shape scaled to 23.6 ps/nm at 1570 nm.
DispersionModel idler_path_model();

/// Unweighted least-squares cubic about `reference_nm`. Throws Error(fit) for fewer than
/// five points or a rank-deficient design, Error(no_fold) when the fitted derivative has
/// no minimum inside the data span.
DispersionModel fit_dispersion(std::span<const CalibrationPoint> points, double reference_nm = 1319.0);

/// Throws Error(range) outside the model's valid range.
double wavelength_to_delay(const DispersionModel& model, double wavelength_nm);

enum class Branch { above_fold, below_fold };

/// Inverts τ(λ) on one monotone branch by bisection. Throws Error(unphysical_delay) below the
/// fold minimum and Error(range) when the branch has no solution inside the valid range.
double delay_to_wavelength(const DispersionModel& model, double delay_ps, Branch branch = Branch::above_fold);

struct DetectorModel {
  double jitter_fwhm_ps = 65.0;
  double dark_rate_hz = 1000.0;
  double efficiency = 1.0;
  double deadtime_ns = 70.0;

  void validate() const;
  double jitter_sigma_ps() const;
};

struct Resolution {
  double sigma_nm = 0.0;
  bool divergent = false;  // local dispersion is zero
};

/// 1σ wavelength uncertainty from timing jitter: σ_t / |dτ/dλ|.
Resolution resolution(const DispersionModel& model, const DetectorModel& detector, double wavelength_nm);

std::string to_key_value(const DispersionModel& model);
DispersionModel dispersion_from_key_value(const std::string& text);

}  // namespace sqz
