#pragma once

#include <numbers>
#include <string_view>

namespace sqz {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
// FWHM of a Gaussian intensity profile in units of its standard deviation.
inline constexpr double kFwhmPerSigma = 2.3548200450309493;

inline double wavelength_to_omega(double wavelength_m) { return kTwoPi * kSpeedOfLight / wavelength_m; }
inline double omega_to_wavelength(double omega) { return kTwoPi * kSpeedOfLight / omega; }

/// Converts a wavelength interval at a given center into angular frequency, |dω/dλ|·Δλ.
inline double wavelength_width_to_omega(double width_m, double center_m) {
  return kTwoPi * kSpeedOfLight * width_m / (center_m * center_m);
}
inline double omega_width_to_wavelength(double width_rad_s, double center_m) {
  return width_rad_s * center_m * center_m / (kTwoPi * kSpeedOfLight);
}

enum class Dimension { length, frequency, time, rate, dimensionless };

struct Quantity {
  double value = 0.0;  // SI
  Dimension dimension = Dimension::dimensionless;
};

/// Parses "<number> [unit]". Lengths: m, mm, um, nm; frequencies: Hz, kHz, MHz,
/// GHz, THz (cycles per second, not angular); times: s, ms, us, ns, ps, fs.
/// A bare number is dimensionless. Throws Error(config) on malformed input.
Quantity parse_quantity(std::string_view text);

}  // namespace sqz
