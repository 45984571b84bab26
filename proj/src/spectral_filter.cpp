#include "sqz/spectral_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sqz/errors.hpp"
#include "sqz/units.hpp"

namespace sqz {

SpectralFilter SpectralFilter::all_pass() {
  SpectralFilter f;
  f.shape = Shape::top_hat;
  f.bandwidth = std::numeric_limits<double>::infinity();
  return f;
}

SpectralFilter SpectralFilter::top_hat(double center, double width) {
  SpectralFilter f;
  f.shape = Shape::top_hat;
  f.center_wavelength = center;
  f.bandwidth = width;
  return f;
}

SpectralFilter SpectralFilter::gaussian(double center, double fwhm) {
  SpectralFilter f;
  f.shape = Shape::gaussian;
  f.center_wavelength = center;
  f.bandwidth = fwhm;
  return f;
}

bool SpectralFilter::is_all_pass() const { return shape == Shape::top_hat && std::isinf(bandwidth); }

void SpectralFilter::validate() const {
  if (shape == Shape::tabulated) {
    if (table.size() < 2) throw Error(ErrorKind::config, "tabulated filter needs at least two points");
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto [wl, t] = table[i];
      if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::config, "filter transmission outside [0, 1]");
      if (!(wl > 0.0)) throw Error(ErrorKind::config, "filter table wavelength must be positive");
      if (i > 0 && !(wl > table[i - 1].first))
        throw Error(ErrorKind::config, "filter table wavelengths must be strictly increasing");
    }
    return;
  }
  if (!(center_wavelength > 0.0)) throw Error(ErrorKind::config, "filter center wavelength must be positive");
  if (!(bandwidth > 0.0)) throw Error(ErrorKind::config, "filter bandwidth must be positive");
}

double SpectralFilter::transmission(double wavelength) const {
  switch (shape) {
    case Shape::top_hat:
      return std::abs(wavelength - center_wavelength) <= 0.5 * bandwidth ? 1.0 : 0.0;
    case Shape::gaussian: {
      const double s = bandwidth / kFwhmPerSigma;
      const double d = wavelength - center_wavelength;
      return std::exp(-d * d / (2.0 * s * s));
    }
    case Shape::tabulated: {
      if (wavelength < table.front().first || wavelength > table.back().first) return 0.0;
      auto hi = std::lower_bound(table.begin(), table.end(), wavelength,
                                 [](const auto& p, double w) { return p.first < w; });
      if (hi == table.begin()) return hi->second;
      auto lo = hi - 1;
      const double f = (wavelength - lo->first) / (hi->first - lo->first);
      return lo->second + f * (hi->second - lo->second);
    }
  }
  return 0.0;
}

std::vector<double> filter_on_axis(const SpectralFilter& filter, double omega_min, double step, std::size_t n) {
  filter.validate();
  std::vector<double> t(n, 1.0);
  if (filter.is_all_pass()) return t;
  const double lo_edge = filter.center_wavelength - 0.5 * filter.bandwidth;
  const double hi_edge = filter.center_wavelength + 0.5 * filter.bandwidth;
  for (std::size_t j = 0; j < n; ++j) {
    const double omega = omega_min + static_cast<double>(j) * step;
    if (filter.shape != SpectralFilter::Shape::top_hat) {
      t[j] = filter.transmission(omega_to_wavelength(omega));
      continue;
    }
    // Cell [ω − Δ/2, ω + Δ/2] maps to [λ_short, λ_long].
    const double cell_short = omega_to_wavelength(omega + 0.5 * step);
    const double cell_long = omega_to_wavelength(omega - 0.5 * step);
    if (cell_short >= lo_edge && cell_long <= hi_edge) {
      t[j] = 1.0;
    } else if (cell_long < lo_edge || cell_short > hi_edge) {
      t[j] = 0.0;
    } else {
      t[j] = 0.5;
    }
  }
  return t;
}

}  // namespace sqz
