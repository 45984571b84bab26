#include "sqz/tof_spectrometer.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "sqz/csv.hpp"
#include "sqz/errors.hpp"
#include "sqz/units.hpp"

namespace sqz {

namespace {

constexpr double kScaleNm = 100.0;  // conditioning of the Vandermonde design

DispersionModel paper_shape(double slope_at_1570) {
  DispersionModel m;
  const double x = 1570.0 - m.reference_nm;
  const double a2 = 0.0598;
  m.coeffs = {0.0, 0.0, a2, (slope_at_1570 - 2.0 * a2 * x) / (3.0 * x * x)};
  m.zero_dispersion_nm = m.reference_nm;
  return m;
}

}  // namespace

void DispersionModel::validate() const {
  for (double c : coeffs)
    if (!std::isfinite(c)) throw Error(ErrorKind::config, "dispersion coefficients must be finite");
  if (!(range_max_nm > range_min_nm)) throw Error(ErrorKind::config, "dispersion range must have max > min");
  if (!(zero_dispersion_nm >= range_min_nm && zero_dispersion_nm <= range_max_nm))
    throw Error(ErrorKind::config, "zero-dispersion wavelength outside the valid range");
}

double DispersionModel::delay(double wavelength_nm) const {
  const double x = wavelength_nm - reference_nm;
  return coeffs[0] + x * (coeffs[1] + x * (coeffs[2] + x * coeffs[3]));
}

double DispersionModel::dispersion(double wavelength_nm) const {
  const double x = wavelength_nm - reference_nm;
  return coeffs[1] + x * (2.0 * coeffs[2] + 3.0 * x * coeffs[3]);
}

DispersionModel signal_path_model() { return paper_shape(24.4); }
DispersionModel idler_path_model() { return paper_shape(23.6); }

DispersionModel fit_dispersion(std::span<const CalibrationPoint> points, double reference_nm) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 5) throw Error(ErrorKind::fit, "dispersion fit needs at least five points");
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd y(n);
  double lo = points[0].wavelength_nm, hi = lo;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& p = points[static_cast<std::size_t>(r)];
    if (!std::isfinite(p.wavelength_nm) || !std::isfinite(p.delay_ps))
      throw Error(ErrorKind::fit, "calibration point is not finite");
    const double u = (p.wavelength_nm - reference_nm) / kScaleNm;
    design.row(r) << 1.0, u, u * u, u * u * u;
    y(r) = p.delay_ps;
    lo = std::min(lo, p.wavelength_nm);
    hi = std::max(hi, p.wavelength_nm);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) throw Error(ErrorKind::fit, "calibration design is rank deficient");
  const Eigen::Vector4d b = qr.solve(y);

  DispersionModel m;
  m.reference_nm = reference_nm;
  for (int k = 0; k < 4; ++k) m.coeffs[static_cast<std::size_t>(k)] = b(k) / std::pow(kScaleNm, k);
  m.n_points = points.size();
  const Eigen::VectorXd resid = y - design * b;
  m.residual_rms_ps = std::sqrt(resid.squaredNorm() / static_cast<double>(n));

  // Roots of dτ/dx = c1 + 2c2 x + 3c3 x² with positive curvature.
  const double c1 = m.coeffs[1], c2 = m.coeffs[2], c3 = m.coeffs[3];
  double root = std::nan("");
  auto accept = [&](double x) {
    const double lam = x + reference_nm;
    if (lam >= lo && lam <= hi && 2.0 * c2 + 6.0 * c3 * x > 0.0) root = x;
  };
  if (std::abs(c3) < 1e-300) {
    if (c2 != 0.0) accept(-c1 / (2.0 * c2));
  } else {
    const double disc = 4.0 * c2 * c2 - 12.0 * c3 * c1;
    if (disc >= 0.0) {
      const double q = -0.5 * (2.0 * c2 + std::copysign(std::sqrt(disc), c2));
      if (q != 0.0) accept(c1 / q);
      accept(q / (3.0 * c3));
    }
  }
  if (std::isnan(root)) throw Error(ErrorKind::no_fold, "fitted dispersion has no minimum inside the data span");
  m.zero_dispersion_nm = root + reference_nm;
  m.range_min_nm = std::min(m.range_min_nm, lo);
  m.range_max_nm = std::max(m.range_max_nm, hi);

  if (n > 4) {
    // Delta method on the scaled coefficients: λ_0 solves D(u, b) = b1 + 2b2u + 3b3u² = 0.
    const double s2 = resid.squaredNorm() / static_cast<double>(n - 4);
    const Eigen::MatrixXd xtx_inv = (design.transpose() * design).inverse();
    const double u = root / kScaleNm;
    const double dd_du = 2.0 * b(2) + 6.0 * b(3) * u;
    Eigen::Vector4d grad(0.0, 1.0, 2.0 * u, 3.0 * u * u);
    grad *= -kScaleNm / dd_du;
    m.zero_dispersion_sigma_nm = std::sqrt(std::max(0.0, s2 * grad.dot(xtx_inv * grad)));
  }
  return m;
}

double wavelength_to_delay(const DispersionModel& model, double wavelength_nm) {
  if (!(wavelength_nm >= model.range_min_nm && wavelength_nm <= model.range_max_nm))
    throw Error(ErrorKind::range, "wavelength " + format_number(wavelength_nm) + " nm outside the dispersion model range");
  return model.delay(wavelength_nm);
}

double delay_to_wavelength(const DispersionModel& model, double delay_ps, Branch branch) {
  const double t0 = model.min_delay();
  if (!(delay_ps >= t0 - 1e-9)) throw Error(ErrorKind::unphysical_delay, "delay is below the fold minimum");
  double a = model.zero_dispersion_nm;
  double b = branch == Branch::above_fold ? model.range_max_nm : model.range_min_nm;
  if (std::abs(model.delay(b) - t0) < std::abs(delay_ps - t0))
    throw Error(ErrorKind::range, "delay has no solution on the requested branch inside the valid range");
  if (delay_ps <= t0) return model.zero_dispersion_nm;
  // τ − t0 is monotone increasing in |λ − λ_0| on each branch.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (std::abs(b - a) < 1e-10) break;
    (model.delay(mid) < delay_ps ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

void DetectorModel::validate() const {
  if (!(jitter_fwhm_ps >= 0.0) || !(dark_rate_hz >= 0.0) || !(deadtime_ns >= 0.0))
    throw Error(ErrorKind::config, "detector parameters must be non-negative");
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw Error(ErrorKind::config, "detector efficiency must be in [0, 1]");
}

double DetectorModel::jitter_sigma_ps() const { return jitter_fwhm_ps / kFwhmPerSigma; }

Resolution resolution(const DispersionModel& model, const DetectorModel& detector, double wavelength_nm) {
  detector.validate();
  if (!(wavelength_nm >= model.range_min_nm && wavelength_nm <= model.range_max_nm))
    throw Error(ErrorKind::range, "wavelength outside the dispersion model range");
  const double d = std::abs(model.dispersion(wavelength_nm));
  const double sigma_t = detector.jitter_sigma_ps();
  if (d < 1e-12) return {sigma_t == 0.0 ? 0.0 : std::numeric_limits<double>::infinity(), true};
  return {sigma_t / d, false};
}

std::string to_key_value(const DispersionModel& m) {
  std::ostringstream out;
  out << "[dispersion]\n";
  out << "reference_nm = " << format_number(m.reference_nm) << '\n';
  for (std::size_t k = 0; k < 4; ++k) out << 'c' << k << " = " << format_number(m.coeffs[k]) << '\n';
  out << "zero_dispersion_nm = " << format_number(m.zero_dispersion_nm) << '\n';
  out << "zero_dispersion_sigma_nm = " << format_number(m.zero_dispersion_sigma_nm) << '\n';
  out << "range_min_nm = " << format_number(m.range_min_nm) << '\n';
  out << "range_max_nm = " << format_number(m.range_max_nm) << '\n';
  out << "residual_rms_ps = " << format_number(m.residual_rms_ps) << '\n';
  out << "n_points = " << m.n_points << '\n';
  return out.str();
}

DispersionModel dispersion_from_key_value(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      kv[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, "dispersion key '" + key + "' is not a number");
    }
  }
  auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::config, "dispersion model is missing key '" + key + "'");
    return it->second;
  };
  DispersionModel m;
  m.reference_nm = need("reference_nm");
  for (std::size_t k = 0; k < 4; ++k) m.coeffs[k] = need("c" + std::to_string(k));
  m.zero_dispersion_nm = need("zero_dispersion_nm");
  m.range_min_nm = need("range_min_nm");
  m.range_max_nm = need("range_max_nm");
  if (kv.count("zero_dispersion_sigma_nm")) m.zero_dispersion_sigma_nm = kv["zero_dispersion_sigma_nm"];
  if (kv.count("residual_rms_ps")) m.residual_rms_ps = kv["residual_rms_ps"];
  if (kv.count("n_points")) m.n_points = static_cast<std::size_t>(kv["n_points"]);
  m.validate();
  return m;
}

}  // namespace sqz
