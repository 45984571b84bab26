#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace sqz {

struct SpectralFilter {
  enum class Shape { top_hat, gaussian, tabulated };

  Shape shape = Shape::top_hat;
  double center_wavelength = 1570e-9;  // m
  double bandwidth = 8.6e-9;           // full width (top_hat) or FWHM (gaussian), m
  std::vector<std::pair<double, double>> table;  // (wavelength m, transmission), ascending

  static SpectralFilter all_pass();
  static SpectralFilter top_hat(double center, double width);
  static SpectralFilter gaussian(double center, double fwhm);

  bool is_all_pass() const;
  void validate() const;

  /// Intensity transmission at a single wavelength. Top-hat edges are inclusive.
  double transmission(double wavelength) const;
};

/// Intensity transmission on a uniform angular-frequency axis. A top-hat grid point
/// whose cell straddles a band edge gets exactly 0.5.
std::vector<double> filter_on_axis(const SpectralFilter& filter, double omega_min, double step, std::size_t n);

}  // namespace sqz
