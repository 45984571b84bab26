#include "sqz/jsa_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

#include <Eigen/SVD>

#include "sqz/errors.hpp"
#include "sqz/parallel.hpp"
#include "sqz/units.hpp"

namespace sqz {

namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

std::complex<double> sinc_phase(double x) {
  const double s = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return s * std::complex<double>(std::cos(x), std::sin(x));
}

// Flips the global phase of column n so that its first significant entry is real-positive,
// and applies the conjugate rotation to the partner column so the product is unchanged.
void fix_phase(ComplexMatrix& a, ComplexMatrix& b, Eigen::Index n) {
  const double peak = a.col(n).cwiseAbs().maxCoeff();
  if (peak == 0.0) return;
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    const auto z = a(j, n);
    if (std::abs(z) > 1e-6 * peak) {
      const auto rot = std::conj(z) / std::abs(z);
      a.col(n) *= rot;
      b.col(n) *= std::conj(rot);
      return;
    }
  }
}

std::vector<double> normalized_squares(const Eigen::VectorXd& singular) {
  std::vector<double> w(static_cast<std::size_t>(singular.size()));
  double total = 0.0;
  for (Eigen::Index n = 0; n < singular.size(); ++n) {
    w[static_cast<std::size_t>(n)] = singular(n) * singular(n);
    total += w[static_cast<std::size_t>(n)];
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorKind::numeric, "matrix has no nonzero singular value");
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

void FrequencyGrid::validate() const {
  if (n_signal < 2 || n_idler < 2) throw Error(ErrorKind::config, "frequency grid needs at least two bins per axis");
  if (!(std::isfinite(signal_min) && std::isfinite(signal_max) && signal_max > signal_min))
    throw Error(ErrorKind::config, "signal axis bounds must be finite with max > min");
  if (!(std::isfinite(idler_min) && std::isfinite(idler_max) && idler_max > idler_min))
    throw Error(ErrorKind::config, "idler axis bounds must be finite with max > min");
}

bool FrequencyGrid::symmetric() const {
  return n_signal == n_idler && signal_min == idler_min && signal_max == idler_max;
}

FrequencyGrid FrequencyGrid::centered(double center, double half_span, std::size_t n) {
  FrequencyGrid g;
  g.n_signal = g.n_idler = n;
  g.signal_min = g.idler_min = center - half_span;
  g.signal_max = g.idler_max = center + half_span;
  g.validate();
  return g;
}

void SourceConfig::validate() const {
  if (!finite_positive(pump_center_wavelength)) throw Error(ErrorKind::config, "pump_center_wavelength must be positive");
  if (!finite_positive(pump_fwhm_bandwidth)) throw Error(ErrorKind::config, "pump_fwhm_bandwidth must be positive");
  if (!(pump_fwhm_bandwidth < pump_center_wavelength))
    throw Error(ErrorKind::config, "pump_fwhm_bandwidth must be smaller than the pump wavelength");
  if (!finite_positive(crystal_length)) throw Error(ErrorKind::config, "crystal_length must be positive");
  if (!finite_positive(poling_period)) throw Error(ErrorKind::config, "poling_period must be positive");
  if (!finite_positive(group_index_pump) || !finite_positive(group_index_signal) || !finite_positive(group_index_idler))
    throw Error(ErrorKind::config, "group indices must be positive");
  if (!finite_positive(pump_waist)) throw Error(ErrorKind::config, "pump_waist must be positive");
  if (!finite_positive(confocal_parameter)) throw Error(ErrorKind::config, "confocal_parameter must be positive");
  if (!std::isfinite(signal_center_offset) || !std::isfinite(pump_chirp))
    throw Error(ErrorKind::config, "signal_center_offset and pump_chirp must be finite");
  if (std::abs(signal_center_offset) >= 2.0 * pump_center_wavelength)
    throw Error(ErrorKind::config, "signal_center_offset is larger than the down-converted wavelength");
}

double SourceConfig::pump_omega() const { return wavelength_to_omega(pump_center_wavelength); }

double SourceConfig::pump_sigma() const {
  return wavelength_width_to_omega(pump_fwhm_bandwidth / kFwhmPerSigma, pump_center_wavelength);
}

std::pair<double, double> SourceConfig::center_omegas() const {
  // ω_s = h + δ, ω_i = h − δ with 2πc/(h − δ) − 2πc/(h + δ) = offset, solved for δ in
  // the cancellation-free form of the quadratic root.
  const double h = 0.5 * pump_omega();
  const double a = 2.0 * std::numbers::pi * kSpeedOfLight;
  const double o = signal_center_offset;
  const double delta = 2.0 * o * h * h / (2.0 * a + std::sqrt(4.0 * a * a + 4.0 * o * o * h * h));
  return {h + delta, h - delta};
}

FrequencyGrid default_grid(const SourceConfig& cfg, std::size_t n, double span_in_sigma) {
  cfg.validate();
  if (!(span_in_sigma > 0.0)) throw Error(ErrorKind::config, "grid span must be positive");
  return FrequencyGrid::centered(0.5 * cfg.pump_omega(), span_in_sigma * cfg.pump_sigma(), n);
}

PumpEnvelope::PumpEnvelope(const SourceConfig& cfg)
    : omega_p_(cfg.pump_omega()), sigma_(cfg.pump_sigma()), chirp_(cfg.pump_chirp) {}

std::complex<double> PumpEnvelope::operator()(double omega_sum) const {
  const double d = omega_sum - omega_p_;
  const double mag = std::exp(-d * d / (4.0 * sigma_ * sigma_));
  if (chirp_ == 0.0) return {mag, 0.0};
  const double ph = 0.5 * chirp_ * d * d;
  return mag * std::complex<double>(std::cos(ph), std::sin(ph));
}

PhaseMatching::PhaseMatching(const SourceConfig& cfg)
    : inv_v_pump_(cfg.group_index_pump / kSpeedOfLight),
      inv_v_signal_(cfg.group_index_signal / kSpeedOfLight),
      inv_v_idler_(cfg.group_index_idler / kSpeedOfLight),
      length_(cfg.crystal_length) {
  std::tie(omega_s0_, omega_i0_) = cfg.center_omegas();
}

double PhaseMatching::delta_k(double omega_s, double omega_i) const {
  const double ds = omega_s - omega_s0_;
  const double di = omega_i - omega_i0_;
  return inv_v_pump_ * (ds + di) - inv_v_signal_ * ds - inv_v_idler_ * di;
}

std::complex<double> PhaseMatching::operator()(double omega_s, double omega_i) const {
  return sinc_phase(0.5 * delta_k(omega_s, omega_i) * length_);
}

PumpEnvelope build_pump_envelope(const SourceConfig& cfg, const FrequencyGrid& grid) {
  cfg.validate();
  grid.validate();
  PumpEnvelope env(cfg);
  const double sum_lo = grid.signal_min + grid.idler_min;
  const double sum_hi = grid.signal_max + grid.idler_max;
  const double nearest = std::clamp(env.center(), sum_lo, sum_hi);
  if (!(std::abs(env(nearest)) >= 1e-300))
    throw Error(ErrorKind::degenerate_envelope, "frequency grid does not overlap the pump band");
  return env;
}

PhaseMatching build_phase_matching(const SourceConfig& cfg, const FrequencyGrid& grid) {
  cfg.validate();
  grid.validate();
  return PhaseMatching(cfg);
}

double JointSpectralAmplitude::norm_squared() const {
  return amplitude.squaredNorm() * grid.signal_step() * grid.idler_step();
}

RealMatrix JointSpectralAmplitude::intensity() const { return amplitude.cwiseAbs2(); }

void JointSpectralAmplitude::validate() const {
  grid.validate();
  if (static_cast<std::size_t>(amplitude.rows()) != grid.n_signal ||
      static_cast<std::size_t>(amplitude.cols()) != grid.n_idler)
    throw Error(ErrorKind::grid_mismatch, "amplitude matrix shape does not match the grid");
  if (!amplitude.allFinite()) throw Error(ErrorKind::numeric, "amplitude has non-finite entries");
}

JointSpectralAmplitude make_jsa(const FrequencyGrid& grid, ComplexMatrix amplitude) {
  JointSpectralAmplitude jsa{grid, std::move(amplitude)};
  jsa.validate();
  const double raw = jsa.amplitude.squaredNorm();
  if (!(raw > std::numeric_limits<double>::min())) throw Error(ErrorKind::empty_overlap, "joint amplitude is zero");
  jsa.amplitude /= std::sqrt(jsa.norm_squared());
  return jsa;
}

JointSpectralAmplitude build_jsa(const SourceConfig& cfg, const FrequencyGrid& grid) {
  const PumpEnvelope alpha = build_pump_envelope(cfg, grid);
  const PhaseMatching phi = build_phase_matching(cfg, grid);
  ComplexMatrix m(grid.n_signal, grid.n_idler);
  for (std::size_t j = 0; j < grid.n_signal; ++j) {
    const double ws = grid.signal_at(j);
    for (std::size_t k = 0; k < grid.n_idler; ++k) {
      const double wi = grid.idler_at(k);
      m(j, k) = alpha(ws + wi) * phi(ws, wi);
    }
  }
  return make_jsa(grid, std::move(m));
}

ComplexMatrix SchmidtDecomposition::reconstruct(std::size_t modes) const {
  const std::size_t r = modes == 0 ? rank() : std::min(modes, rank());
  ComplexMatrix out = ComplexMatrix::Zero(signal_modes.rows(), idler_modes.rows());
  for (std::size_t n = 0; n < r; ++n) {
    const auto c = static_cast<Eigen::Index>(n);
    out.noalias() += std::sqrt(weights[n]) * signal_modes.col(c) * idler_modes.col(c).transpose();
  }
  return out;
}

SchmidtDecomposition schmidt_decompose(const JointSpectralAmplitude& jsa) {
  jsa.validate();
  const double ds = jsa.grid.signal_step();
  const double di = jsa.grid.idler_step();
  const ComplexMatrix scaled = jsa.amplitude * std::sqrt(ds * di);
  Eigen::BDCSVD<ComplexMatrix> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SchmidtDecomposition dec;
  dec.grid = jsa.grid;
  dec.weights = normalized_squares(svd.singularValues());
  dec.signal_modes = svd.matrixU() / std::sqrt(ds);
  dec.idler_modes = svd.matrixV().conjugate() / std::sqrt(di);
  for (Eigen::Index n = 0; n < dec.signal_modes.cols(); ++n) fix_phase(dec.signal_modes, dec.idler_modes, n);
  return dec;
}

std::vector<double> schmidt_weights(const ComplexMatrix& matrix) {
  if (matrix.size() == 0 || !matrix.allFinite()) throw Error(ErrorKind::numeric, "matrix is empty or non-finite");
  Eigen::BDCSVD<ComplexMatrix> svd(matrix);
  return normalized_squares(svd.singularValues());
}

std::vector<double> schmidt_weights(const RealMatrix& matrix) {
  if (matrix.size() == 0 || !matrix.allFinite()) throw Error(ErrorKind::numeric, "matrix is empty or non-finite");
  Eigen::BDCSVD<RealMatrix> svd(matrix);
  return normalized_squares(svd.singularValues());
}

double effective_mode_number(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::numeric, "Schmidt weights must be finite and non-negative");
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0)) throw Error(ErrorKind::numeric, "all Schmidt weights are zero");
  // Scale-free so unnormalised weights give the same K.
  return sum * sum / sum_sq;
}

double effective_mode_number(const SchmidtDecomposition& dec) { return effective_mode_number(dec.weights); }

double k_abs(const JointSpectralAmplitude& jsa) {
  jsa.validate();
  return k_abs(RealMatrix(jsa.amplitude.cwiseAbs()));
}

double k_abs(const RealMatrix& abs_amplitude) {
  if ((abs_amplitude.array() < 0.0).any()) throw Error(ErrorKind::argument, "K_ABS needs a non-negative matrix");
  return effective_mode_number(schmidt_weights(abs_amplitude));
}

FilterResult apply_filter(const JointSpectralAmplitude& jsa, const SpectralFilter& filter_signal,
                          const SpectralFilter& filter_idler) {
  jsa.validate();
  const FrequencyGrid& g = jsa.grid;
  const auto ts = filter_on_axis(filter_signal, g.signal_min, g.signal_step(), g.n_signal);
  const auto ti = filter_on_axis(filter_idler, g.idler_min, g.idler_step(), g.n_idler);

  ComplexMatrix filtered = jsa.amplitude;
  for (std::size_t j = 0; j < g.n_signal; ++j) {
    const double as = std::sqrt(ts[j]);
    for (std::size_t k = 0; k < g.n_idler; ++k) filtered(j, k) *= as * std::sqrt(ti[k]);
  }
  const double kept = filtered.squaredNorm() * g.signal_step() * g.idler_step() / jsa.norm_squared();
  if (!(kept >= 1e-12)) throw Error(ErrorKind::empty_overlap, "filters remove the entire joint spectrum");

  FilterResult out;
  out.jsa = make_jsa(g, std::move(filtered));

  const SchmidtDecomposition dec = schmidt_decompose(jsa);
  const std::size_t r = dec.rank();
  out.signal_mode_transmission.resize(r);
  out.idler_mode_transmission.resize(r);
  double hw = 0.0, hs = 0.0, hi = 0.0;
  for (std::size_t n = 0; n < r; ++n) {
    const auto c = static_cast<Eigen::Index>(n);
    double s = 0.0;
    for (std::size_t j = 0; j < g.n_signal; ++j)
      s += std::norm(dec.signal_modes(static_cast<Eigen::Index>(j), c)) * ts[j];
    double i = 0.0;
    for (std::size_t k = 0; k < g.n_idler; ++k)
      i += std::norm(dec.idler_modes(static_cast<Eigen::Index>(k), c)) * ti[k];
    out.signal_mode_transmission[n] = s * g.signal_step();
    out.idler_mode_transmission[n] = i * g.idler_step();
    if (n >= 1) {
      hw += dec.weights[n];
      hs += dec.weights[n] * out.signal_mode_transmission[n];
      hi += dec.weights[n] * out.idler_mode_transmission[n];
    }
  }
  if (hw > 0.0) {
    out.signal_higher_order_transmission = hs / hw;
    out.idler_higher_order_transmission = hi / hw;
  }
  return out;
}

std::pair<Spectrum, Spectrum> marginal_spectra(const RealMatrix& jsp, const FrequencyGrid& grid) {
  grid.validate();
  if (static_cast<std::size_t>(jsp.rows()) != grid.n_signal || static_cast<std::size_t>(jsp.cols()) != grid.n_idler)
    throw Error(ErrorKind::grid_mismatch, "joint spectrum shape does not match the grid");
  if (!jsp.allFinite()) throw Error(ErrorKind::numeric, "joint spectrum has non-finite entries");
  if ((jsp.array() < 0.0).any()) throw Error(ErrorKind::argument, "joint spectrum must be non-negative");
  const double ds = grid.signal_step();
  const double di = grid.idler_step();
  const double total = jsp.sum() * ds * di;
  if (!(total > 0.0)) throw Error(ErrorKind::numeric, "joint spectrum is all zero");

  Spectrum s, i;
  s.axis.resize(grid.n_signal);
  s.density.resize(grid.n_signal);
  i.axis.resize(grid.n_idler);
  i.density.resize(grid.n_idler);
  const Eigen::VectorXd rows = jsp.rowwise().sum();
  const Eigen::VectorXd cols = jsp.colwise().sum().transpose();
  for (std::size_t j = 0; j < grid.n_signal; ++j) {
    s.axis[j] = grid.signal_at(j);
    s.density[j] = rows(static_cast<Eigen::Index>(j)) * di / total;
  }
  for (std::size_t k = 0; k < grid.n_idler; ++k) {
    i.axis[k] = grid.idler_at(k);
    i.density[k] = cols(static_cast<Eigen::Index>(k)) * ds / total;
  }
  return {std::move(s), std::move(i)};
}

double overlap_integral(const Spectrum& a, const Spectrum& b) {
  const std::size_t n = a.axis.size();
  if (n < 2 || b.axis.size() != n || a.density.size() != n || b.density.size() != n)
    throw Error(ErrorKind::grid_mismatch, "spectra must share one axis");
  const double tol = 1e-12 * std::max(std::abs(a.axis.front()), std::abs(a.axis.back()));
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(a.axis[j] - b.axis[j]) > tol) throw Error(ErrorKind::grid_mismatch, "spectra must share one axis");
  double na = 0.0, nb = 0.0, cross = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (a.density[j] < 0.0 || b.density[j] < 0.0) throw Error(ErrorKind::argument, "spectra must be non-negative");
    na += a.density[j];
    nb += b.density[j];
    cross += std::sqrt(a.density[j] * b.density[j]);
  }
  if (!(na > 0.0 && nb > 0.0)) throw Error(ErrorKind::numeric, "spectrum is all zero");
  return std::min(1.0, cross * cross / (na * nb));
}

double spectrum_peak_wavelength(const Spectrum& s) {
  if (s.axis.empty() || s.axis.size() != s.density.size()) throw Error(ErrorKind::argument, "empty spectrum");
  const auto it = std::max_element(s.density.begin(), s.density.end());
  return omega_to_wavelength(s.axis[static_cast<std::size_t>(it - s.density.begin())]);
}

double spectrum_fwhm_wavelength(const Spectrum& s) {
  if (s.axis.size() < 3 || s.axis.size() != s.density.size()) throw Error(ErrorKind::argument, "spectrum too short");
  const auto it = std::max_element(s.density.begin(), s.density.end());
  const std::size_t peak = static_cast<std::size_t>(it - s.density.begin());
  const double half = 0.5 * *it;
  if (!(half > 0.0)) throw Error(ErrorKind::numeric, "spectrum is all zero");
  auto cross = [&](std::size_t a, std::size_t b) {
    const double f = (s.density[a] - half) / (s.density[a] - s.density[b]);
    return s.axis[a] + f * (s.axis[b] - s.axis[a]);
  };
  std::size_t l = peak;
  while (l > 0 && s.density[l - 1] >= half) --l;
  std::size_t r = peak;
  while (r + 1 < s.axis.size() && s.density[r + 1] >= half) ++r;
  if (l == 0 || r + 1 == s.axis.size()) throw Error(ErrorKind::range, "spectrum does not fall to half maximum on the axis");
  const double w_lo = cross(l, l - 1);
  const double w_hi = cross(r, r + 1);
  return omega_to_wavelength(w_lo) - omega_to_wavelength(w_hi);
}

double HomCurve::visibility() const {
  const std::size_t n = coincidence_probability.size();
  if (n < 3) throw Error(ErrorKind::argument, "HOM curve needs at least three points");
  const std::size_t edge = std::max<std::size_t>(1, n / 5);
  double base = 0.0;
  for (std::size_t j = 0; j < edge; ++j) base += coincidence_probability[j] + coincidence_probability[n - 1 - j];
  base /= static_cast<double>(2 * edge);
  if (!(base > 0.0)) throw Error(ErrorKind::baseline, "HOM baseline is not positive");
  const double lo = *std::min_element(coincidence_probability.begin(), coincidence_probability.end());
  return 1.0 - lo / base;
}

namespace {

struct ExchangeKernel {
  ComplexMatrix m;  // Ψ(ω_j, ω_k)·Ψ*(ω_k, ω_j)·Δ²
  std::vector<double> offsets;
};

ExchangeKernel exchange_kernel(const JointSpectralAmplitude& jsa) {
  jsa.validate();
  if (!jsa.grid.symmetric()) throw Error(ErrorKind::grid_mismatch, "HOM overlap needs identical signal and idler axes");
  const auto n = jsa.amplitude.rows();
  const double d = jsa.grid.signal_step();
  ExchangeKernel k;
  k.m = jsa.amplitude.cwiseProduct(jsa.amplitude.transpose().conjugate()) * (d * d);
  k.offsets.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (jsa.grid.signal_min + jsa.grid.signal_max);
  for (Eigen::Index j = 0; j < n; ++j) k.offsets[static_cast<std::size_t>(j)] = jsa.grid.signal_at(static_cast<std::size_t>(j)) - mid;
  return k;
}

double coincidence_at(const ExchangeKernel& k, double dt) {
  const auto n = k.m.rows();
  Eigen::VectorXcd e(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double ph = k.offsets[static_cast<std::size_t>(j)] * dt;
    e(j) = {std::cos(ph), std::sin(ph)};
  }
  // Σ_jk M_jk e^{−iω_jΔt} e^{+iω_kΔt}
  const std::complex<double> overlap = e.dot(k.m * e);
  // |overlap| ≤ 1 exactly; clamp rounding so the result stays a probability.
  return std::clamp(0.5 * (1.0 - overlap.real()), 0.0, 1.0);
}

}  // namespace

HomCurve hom_curve(const JointSpectralAmplitude& jsa, std::span<const double> delays) {
  if (delays.empty()) throw Error(ErrorKind::argument, "delay list is empty");
  const ExchangeKernel k = exchange_kernel(jsa);
  HomCurve c;
  c.delays.assign(delays.begin(), delays.end());
  c.coincidence_probability.resize(delays.size());
  parallel_for(delays.size(), [&](std::size_t t) { c.coincidence_probability[t] = coincidence_at(k, delays[t]); });
  return c;
}

double hom_dip_delay(const JointSpectralAmplitude& jsa, double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorKind::argument, "dip search interval must have hi > lo");
  const ExchangeKernel k = exchange_kernel(jsa);
  // Coarse scan first: the curve is flat far from the dip, which defeats a bare bracket search.
  constexpr int kCoarse = 200;
  const double step = (hi - lo) / kCoarse;
  std::vector<double> coarse(kCoarse + 1);
  parallel_for(coarse.size(), [&](std::size_t i) { coarse[i] = coincidence_at(k, lo + static_cast<double>(i) * step); });
  const auto best = static_cast<double>(std::min_element(coarse.begin(), coarse.end()) - coarse.begin());
  double a = std::max(lo, lo + (best - 1.0) * step), b = std::min(hi, lo + (best + 1.0) * step);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = coincidence_at(k, x1), f2 = coincidence_at(k, x2);
  for (int it = 0; it < 200 && (b - a) > 1e-19; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = coincidence_at(k, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = coincidence_at(k, x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace sqz
