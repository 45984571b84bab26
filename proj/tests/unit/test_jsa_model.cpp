#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sqz/errors.hpp"
#include "sqz/jsa_model.hpp"
#include "sqz/units.hpp"

using namespace sqz;

namespace {

SourceConfig offset_source() {
  SourceConfig cfg;
  cfg.signal_center_offset = 2e-9;
  return cfg;
}

FilterResult paper_filtered() {
  const SourceConfig cfg = offset_source();
  const auto jsa = build_jsa(cfg, default_grid(cfg));
  const auto f = SpectralFilter::top_hat(1570e-9, 8.6e-9);
  return apply_filter(jsa, f, f);
}

FrequencyGrid unit_grid(std::size_t n, double half_span) {
  return FrequencyGrid::centered(0.0, half_span, n);
}

double weighted_frobenius(const ComplexMatrix& a, const ComplexMatrix& b, const FrequencyGrid& g) {
  return (a - b).norm() * std::sqrt(g.signal_step() * g.idler_step());
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an sqz::Error");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("pump sigma follows the unit conversion from wavelength FWHM") {
  SourceConfig cfg;
  CHECK(cfg.pump_sigma() == doctest::Approx(oracle::pump_sigma_from_fwhm(5.35e-9, 785e-9)).epsilon(1e-12));
  const PumpEnvelope env(cfg);
  CHECK(std::abs(env(env.center())) == doctest::Approx(1.0));
  // |α|² is Gaussian with σ_p, so the intensity falls to one half at FWHM/2.
  const double half = 0.5 * kFwhmPerSigma * env.sigma();
  CHECK(std::norm(env(env.center() + half)) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::norm(env(env.center() - half)) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("pump envelope on a grid that misses the band is degenerate") {
  SourceConfig cfg;
  const FrequencyGrid far = FrequencyGrid::centered(wavelength_to_omega(3000e-9), 1e12, 64);
  CHECK(kind_of([&] { build_pump_envelope(cfg, far); }) == ErrorKind::degenerate_envelope);
}

TEST_CASE("phase matching is unity on the ridge and zero at the first sinc node") {
  SourceConfig cfg;
  const PhaseMatching pm(cfg);
  const auto [ws, wi] = cfg.center_omegas();
  CHECK(std::abs(pm(ws, wi)) == doctest::Approx(1.0).epsilon(1e-12));
  // Move along the anti-ridge direction until ΔkL/2 = π.
  const double slope = pm.delta_k(ws + 1e10, wi - 1e10) / 1e10;
  const double d = 2.0 * std::numbers::pi / (cfg.crystal_length * slope);
  CHECK(std::abs(pm(ws + d, wi - d)) < 1e-9);
}

TEST_CASE("with the pump group index at the mean, the phase-matching ridge is perpendicular to the pump ridge") {
  SourceConfig cfg;
  REQUIRE(cfg.group_index_pump == doctest::Approx(0.5 * (cfg.group_index_signal + cfg.group_index_idler)));
  const PhaseMatching pm(cfg);
  const auto [ws, wi] = cfg.center_omegas();
  // Along (+1, +1) Δk stays zero; the pump envelope depends only on ω_s + ω_i, i.e. is
  // constant along (+1, −1).
  CHECK(std::abs(pm.delta_k(ws + 3e12, wi + 3e12)) < 1e-6 * std::abs(pm.delta_k(ws + 3e12, wi - 3e12)));
}

TEST_CASE("build_jsa is unit normalised and centred on the degeneracy point") {
  SourceConfig cfg;
  const auto jsa = build_jsa(cfg, default_grid(cfg));
  CHECK(jsa.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
  const auto [s, i] = marginal_spectra(jsa.intensity(), jsa.grid);
  CHECK(spectrum_peak_wavelength(s) == doctest::Approx(1570e-9).epsilon(3e-4));
  CHECK(spectrum_peak_wavelength(i) == doctest::Approx(1570e-9).epsilon(3e-4));
}

TEST_CASE("signal_center_offset separates the marginal peaks") {
  const SourceConfig cfg = offset_source();
  const auto jsa = build_jsa(cfg, default_grid(cfg));
  const auto [s, i] = marginal_spectra(jsa.intensity(), jsa.grid);
  const double sep = spectrum_peak_wavelength(i) - spectrum_peak_wavelength(s);
  CHECK(sep == doctest::Approx(2e-9).epsilon(0.2));
}

TEST_CASE("separable kernels have K = K_ABS = 1") {
  const auto g = unit_grid(96, 5.0);
  ComplexMatrix m(96, 96);
  for (int j = 0; j < 96; ++j)
    for (int k = 0; k < 96; ++k) {
      const double x = g.signal_at(j), y = g.idler_at(k);
      m(j, k) = std::exp(-x * x / 2.0 - (y - 0.5) * (y - 0.5) / 3.0) * std::polar(1.0, 0.3 * x * x - y);
    }
  const auto jsa = make_jsa(g, m);
  const auto dec = schmidt_decompose(jsa);
  CHECK(std::abs(effective_mode_number(dec) - 1.0) < 1e-9);
  CHECK(std::abs(k_abs(jsa) - 1.0) < 1e-9);
}

TEST_CASE("correlated Gaussian weights match the analytic geometric series") {
  const double a = 1.0, b = 2.5;
  const auto g = unit_grid(160, 14.0);
  const auto jsa = make_jsa(g, oracle::correlated_gaussian(a, b, 160, 14.0));
  const auto dec = schmidt_decompose(jsa);
  for (int n = 0; n < 6; ++n) CHECK(dec.weights[n] == doctest::Approx(oracle::correlated_gaussian_weight(a, b, n)).epsilon(1e-6));
  const double k = (a / b + b / a) / 2.0;
  CHECK(effective_mode_number(dec) == doctest::Approx(k).epsilon(1e-6));
}

TEST_CASE("leading weight agrees with a 4x refined grid") {
  const double a = 1.0, b = 1.8;
  const auto coarse = make_jsa(unit_grid(64, 12.0), oracle::correlated_gaussian(a, b, 64, 12.0));
  const double fine = oracle::leading_weight(oracle::correlated_gaussian(a, b, 256, 12.0));
  CHECK(std::abs(schmidt_decompose(coarse).weights[0] - fine) < 1e-6);
}

TEST_CASE("chirped kernel: K from the density matrix, and K > K_ABS") {
  const auto g = unit_grid(64, 6.0);
  ComplexMatrix m(64, 64);
  for (int j = 0; j < 64; ++j)
    for (int k = 0; k < 64; ++k) {
      const double x = g.signal_at(j), y = g.idler_at(k);
      m(j, k) = std::exp(-(x * x + y * y) / 4.0) * std::polar(1.0, 0.8 * x * y);
    }
  const auto jsa = make_jsa(g, m);
  const double k = effective_mode_number(schmidt_decompose(jsa));
  CHECK(k == doctest::Approx(oracle::k_from_density_matrix(m)).epsilon(1e-9));
  CHECK(k > 1.5);
  CHECK(k_abs(jsa) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Schmidt modes are orthonormal, ordered and reconstruct the kernel") {
  SourceConfig cfg;
  const auto jsa = build_jsa(cfg, default_grid(cfg));
  const auto dec = schmidt_decompose(jsa);
  double sum = 0.0;
  for (std::size_t n = 0; n < dec.rank(); ++n) {
    sum += dec.weights[n];
    if (n > 0) CHECK(dec.weights[n] <= dec.weights[n - 1]);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  const double ds = jsa.grid.signal_step();
  const auto s5 = dec.signal_modes.leftCols(5);
  const Eigen::MatrixXcd gram = s5.adjoint() * s5 * ds;
  CHECK((gram - Eigen::MatrixXcd::Identity(5, 5)).norm() < 1e-8);
  // First non-negligible component of each mode is real and positive.
  for (int n = 0; n < 3; ++n) {
    Eigen::Index j = 0;
    while (std::abs(dec.signal_modes(j, n)) < 1e-6 * dec.signal_modes.col(n).cwiseAbs().maxCoeff()) ++j;
    CHECK(dec.signal_modes(j, n).real() > 0.0);
    CHECK(std::abs(dec.signal_modes(j, n).imag()) < 1e-9 * std::abs(dec.signal_modes(j, n)));
  }
  CHECK(weighted_frobenius(dec.reconstruct(), jsa.amplitude, jsa.grid) < 1e-8);
}

TEST_CASE("grid doubling changes K by less than 1e-3") {
  SourceConfig cfg;
  const double k256 = effective_mode_number(schmidt_decompose(build_jsa(cfg, default_grid(cfg, 256))));
  const double k512 = effective_mode_number(schmidt_decompose(build_jsa(cfg, default_grid(cfg, 512))));
  CHECK(std::abs(k256 - k512) < 1e-3);
}

TEST_CASE("effective_mode_number on explicit weights") {
  const std::vector<double> w{0.7, 0.2, 0.1};
  CHECK(effective_mode_number(w) == doctest::Approx(1.0 / (0.49 + 0.04 + 0.01)));
  CHECK(effective_mode_number(std::vector<double>{0.5, 0.5}) == doctest::Approx(2.0));
  CHECK(effective_mode_number(std::vector<double>{1.0}) == 1.0);
  CHECK(kind_of([] { effective_mode_number(std::vector<double>{0.0, 0.0}); }) == ErrorKind::numeric);
}

TEST_CASE("all-pass filtering is the identity") {
  SourceConfig cfg;
  const auto jsa = build_jsa(cfg, default_grid(cfg, 96));
  const auto r = apply_filter(jsa, SpectralFilter::all_pass(), SpectralFilter::all_pass());
  CHECK((r.jsa.amplitude - jsa.amplitude).cwiseAbs().maxCoeff() < 1e-12 * jsa.amplitude.cwiseAbs().maxCoeff());
  for (std::size_t n = 0; n < 10; ++n) {
    CHECK(r.signal_mode_transmission[n] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.idler_mode_transmission[n] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("top-hat mode transmissions agree with the reduced density matrix") {
  const SourceConfig cfg = offset_source();
  const auto jsa = build_jsa(cfg, default_grid(cfg, 128));
  const auto f = SpectralFilter::top_hat(1570e-9, 8.6e-9);
  const auto r = apply_filter(jsa, f, f);
  // Oracle: leading eigenvector of ρ_s = ΨΨ†Δω_i, weighted by the filter on the signal axis.
  const auto& g = jsa.grid;
  const Eigen::MatrixXcd rho = jsa.amplitude * jsa.amplitude.adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  const Eigen::VectorXcd v = es.eigenvectors().col(rho.rows() - 1);
  const auto ts = filter_on_axis(f, g.signal_min, g.signal_step(), g.n_signal);
  double t = 0.0;
  for (std::size_t j = 0; j < g.n_signal; ++j) t += std::norm(v(j)) * ts[j];
  CHECK(r.signal_mode_transmission[0] == doctest::Approx(t / v.squaredNorm()).epsilon(1e-9));
  CHECK(r.signal_mode_transmission[0] > 0.0);
  CHECK(r.signal_mode_transmission[0] < 1.0);
}

TEST_CASE("8.6 nm top-hats pass few higher-order photons") {
  const auto r = paper_filtered();
  CHECK(r.signal_higher_order_transmission < 0.05);
  CHECK(r.idler_higher_order_transmission < 0.05);
}

TEST_CASE("a filter outside the band leaves nothing") {
  SourceConfig cfg;
  const auto jsa = build_jsa(cfg, default_grid(cfg, 64));
  const auto f = SpectralFilter::top_hat(1400e-9, 1e-9);
  CHECK(kind_of([&] { apply_filter(jsa, f, f); }) == ErrorKind::empty_overlap);
}

TEST_CASE("marginal spectra") {
  const auto g = unit_grid(32, 1.0);
  RealMatrix delta = RealMatrix::Zero(32, 32);
  delta(5, 20) = 3.0;
  auto [s, i] = marginal_spectra(delta, g);
  CHECK(s.density[5] > 0.0);
  CHECK(i.density[20] > 0.0);
  CHECK(s.density[4] == 0.0);
  CHECK(i.density[21] == 0.0);

  RealMatrix sym = RealMatrix::Random(32, 32).cwiseAbs();
  sym = (sym + sym.transpose()).eval();
  auto [a, b] = marginal_spectra(sym, g);
  for (std::size_t j = 0; j < 32; ++j) CHECK(a.density[j] == doctest::Approx(b.density[j]).epsilon(1e-12));

  SourceConfig cfg;
  const auto jsa = build_jsa(cfg, default_grid(cfg));
  auto [ms, mi] = marginal_spectra(jsa.intensity(), jsa.grid);
  double is = 0.0, ii = 0.0;
  for (double d : ms.density) is += d * ms.step();
  for (double d : mi.density) ii += d * mi.step();
  CHECK(std::abs(is - 1.0) < 1e-9);
  CHECK(std::abs(ii - 1.0) < 1e-9);

  CHECK(kind_of([&] { marginal_spectra(RealMatrix::Zero(32, 32), g); }) == ErrorKind::numeric);
}

TEST_CASE("filtered marginals are limited by the 8.6 nm filter") {
  const auto r = paper_filtered();
  const auto [s, i] = marginal_spectra(r.jsa.intensity(), r.jsa.grid);
  const double bin_nm = omega_width_to_wavelength(r.jsa.grid.signal_step(), 1570e-9) * 1e9;
  CHECK(std::abs(spectrum_fwhm_wavelength(s) * 1e9 - 8.6) < 1.5 * bin_nm);
  CHECK(std::abs(spectrum_fwhm_wavelength(i) * 1e9 - 8.6) < 1.5 * bin_nm);
}

TEST_CASE("overlap integral") {
  Spectrum a{{0, 1, 2, 3}, {0, 1, 2, 0}};
  Spectrum b{{0, 1, 2, 3}, {0, 0, 0, 5}};
  CHECK(overlap_integral(a, a) == doctest::Approx(1.0));
  CHECK(overlap_integral(a, b) == 0.0);
  Spectrum c{{0, 1, 2}, {1, 1, 1}};
  CHECK(kind_of([&] { overlap_integral(a, c); }) == ErrorKind::grid_mismatch);
}

TEST_CASE("HOM curve of an exchange-symmetric kernel") {
  const auto g = unit_grid(64, 8e12);
  ComplexMatrix m(64, 64);
  for (int j = 0; j < 64; ++j)
    for (int k = 0; k < 64; ++k) {
      const double x = g.signal_at(j) / 1e12, y = g.idler_at(k) / 1e12;
      m(j, k) = std::exp(-(x * x + y * y) / 4.0 - x * y / 8.0);
    }
  const auto jsa = make_jsa(g, m);
  std::vector<double> delays;
  for (int t = -40; t <= 40; ++t) delays.push_back(t * 0.25e-12);
  const auto c = hom_curve(jsa, delays);
  CHECK(c.coincidence_probability[40] < 1e-9);
  CHECK(c.coincidence_probability.front() == doctest::Approx(0.5).epsilon(1e-6));
  for (std::size_t t = 0; t < delays.size(); ++t) {
    CHECK(c.coincidence_probability[t] >= 0.0);
    CHECK(c.coincidence_probability[t] <= 0.5 + 1e-9);
    CHECK(c.coincidence_probability[t] == doctest::Approx(c.coincidence_probability[delays.size() - 1 - t]).epsilon(1e-9));
  }
  CHECK(c.visibility() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(kind_of([&] { hom_curve(jsa, std::vector<double>{}); }) == ErrorKind::argument);
}

TEST_CASE("HOM curve matches a direct double sum for a complex kernel") {
  const auto g = unit_grid(24, 6e12);
  ComplexMatrix m(24, 24);
  for (int j = 0; j < 24; ++j)
    for (int k = 0; k < 24; ++k) {
      const double x = g.signal_at(j) / 1e12, y = g.idler_at(k) / 1e12;
      m(j, k) = std::exp(-(x * x + 2 * y * y) / 6.0 + 0.2 * x) * std::polar(1.0, 0.1 * x * y + 0.3 * y);
    }
  const auto jsa = make_jsa(g, m);
  const double dt = 0.7e-12;
  const auto c = hom_curve(jsa, std::vector<double>{dt});
  std::complex<double> acc = 0.0;
  const double d = g.signal_step();
  for (int j = 0; j < 24; ++j)
    for (int k = 0; k < 24; ++k)
      acc += jsa.amplitude(j, k) * std::conj(jsa.amplitude(k, j)) *
             std::polar(1.0, -(g.signal_at(j) - g.signal_at(k)) * dt) * d * d;
  CHECK(c.coincidence_probability[0] == doctest::Approx(0.5 * (1.0 - acc.real())).epsilon(1e-10));
}

TEST_CASE("offset filtered model: HOM visibility close to the marginal overlap") {
  const auto r = paper_filtered();
  const auto [s, i] = marginal_spectra(r.jsa.intensity(), r.jsa.grid);
  const double ov = overlap_integral(s, i);
  const double dip = hom_dip_delay(r.jsa, -3e-12, 3e-12);
  std::vector<double> delays;
  for (int t = -20; t <= 20; ++t) delays.push_back(dip + t * 0.5e-12);
  const double v = hom_curve(r.jsa, delays).visibility();
  CHECK(std::abs(v - ov) < 0.02);
}
