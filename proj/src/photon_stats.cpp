#include "sqz/photon_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sqz/csv.hpp"
#include "sqz/errors.hpp"

namespace sqz {

namespace {

void check_mean(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw Error(ErrorKind::argument, "mean photon number must be finite and >= 0");
}

double log_choose(unsigned n, unsigned k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

PhotonNumberDistribution finish(std::vector<double> p) {
  PhotonNumberDistribution out{std::move(p), false};
  out.truncated = 1.0 - out.total() > kTruncationTolerance;
  return out;
}

}  // namespace

double PhotonNumberDistribution::total() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

double PhotonNumberDistribution::mean() const {
  double s = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) s += static_cast<double>(n) * probs[n];
  return s;
}

PhotonNumberDistribution JointPhotonNumberDistribution::signal_marginal() const {
  std::vector<double> p(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index n = 0; n < probs.rows(); ++n) p[static_cast<std::size_t>(n)] = probs.row(n).sum();
  return PhotonNumberDistribution{std::move(p), truncated};
}

PhotonNumberDistribution JointPhotonNumberDistribution::idler_marginal() const {
  std::vector<double> p(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index m = 0; m < probs.cols(); ++m) p[static_cast<std::size_t>(m)] = probs.col(m).sum();
  return PhotonNumberDistribution{std::move(p), truncated};
}

void SqueezerSpec::validate() const {
  check_mean(mean_total_photons);
  if (schmidt_weights.empty()) throw Error(ErrorKind::argument, "schmidt_weights must not be empty");
  double sum = 0.0;
  for (double w : schmidt_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::argument, "Schmidt weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::argument, "Schmidt weights must sum to 1");
}

PhotonNumberDistribution poisson_pn(double mean, std::size_t nmax) {
  check_mean(mean);
  std::vector<double> p(nmax + 1);
  p[0] = std::exp(-mean);
  for (std::size_t n = 1; n <= nmax; ++n) p[n] = p[n - 1] * mean / static_cast<double>(n);
  return finish(std::move(p));
}

PhotonNumberDistribution thermal_pn(double mean, std::size_t nmax) {
  check_mean(mean);
  std::vector<double> p(nmax + 1);
  const double ratio = mean / (1.0 + mean);
  p[0] = 1.0 / (1.0 + mean);
  for (std::size_t n = 1; n <= nmax; ++n) p[n] = p[n - 1] * ratio;
  return finish(std::move(p));
}

JointPhotonNumberDistribution tmsv_joint_pn(const SqueezerSpec& spec, std::size_t nmax) {
  spec.validate();
  if (spec.schmidt_weights.size() != 1)
    throw Error(ErrorKind::argument, "tmsv_joint_pn is single-mode; use multimode_joint_pn");
  const auto diag = thermal_pn(spec.mean_total_photons, nmax);
  JointPhotonNumberDistribution out;
  out.probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nmax + 1), static_cast<Eigen::Index>(nmax + 1));
  for (std::size_t n = 0; n <= nmax; ++n) out.probs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = diag.probs[n];
  out.truncated = diag.truncated;
  return out;
}

std::vector<double> per_mode_means(const SqueezerSpec& spec) {
  spec.validate();
  const auto& w = spec.schmidt_weights;
  std::vector<double> mu(w.size(), 0.0);
  if (spec.mean_total_photons == 0.0) return mu;
  auto total = [&](double c) {
    double s = 0.0;
    for (double l : w) {
      const double sh = std::sinh(c * std::sqrt(l));
      s += sh * sh;
    }
    return s;
  };
  // total(c) is increasing in c; bracket then bisect.
  double lo = 0.0, hi = 1.0;
  while (total(hi) < spec.mean_total_photons) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < spec.mean_total_photons ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double sh = std::sinh(c * std::sqrt(w[n]));
    mu[n] = sh * sh;
  }
  return mu;
}

JointPhotonNumberDistribution multimode_joint_pn(const SqueezerSpec& spec, std::size_t nmax) {
  const auto mu = per_mode_means(spec);
  std::vector<double> acc(nmax + 1, 0.0);
  acc[0] = 1.0;
  for (double m : mu) {
    if (m == 0.0) continue;
    const auto mode = thermal_pn(m, nmax);
    std::vector<double> next(nmax + 1, 0.0);
    for (std::size_t a = 0; a <= nmax; ++a) {
      if (acc[a] == 0.0) continue;
      for (std::size_t b = 0; a + b <= nmax; ++b) next[a + b] += acc[a] * mode.probs[b];
    }
    acc = std::move(next);
  }
  JointPhotonNumberDistribution out;
  out.probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nmax + 1), static_cast<Eigen::Index>(nmax + 1));
  double sum = 0.0;
  for (std::size_t n = 0; n <= nmax; ++n) {
    out.probs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = acc[n];
    sum += acc[n];
  }
  out.truncated = 1.0 - sum > kTruncationTolerance;
  return out;
}

PhotonNumberDistribution smsv_pn(double mean_photons, std::size_t nmax) {
  check_mean(mean_photons);
  const double r = std::asinh(std::sqrt(mean_photons));
  const double t2 = std::tanh(r) * std::tanh(r);
  std::vector<double> p(nmax + 1, 0.0);
  p[0] = 1.0 / std::cosh(r);
  for (std::size_t n = 2; n <= nmax; n += 2) {
    const double m = static_cast<double>(n / 2);
    p[n] = p[n - 2] * (2.0 * m - 1.0) / (2.0 * m) * t2;
  }
  return finish(std::move(p));
}

double g2_from_pn(const PhotonNumberDistribution& pn) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t n = 0; n < pn.probs.size(); ++n) {
    const double x = static_cast<double>(n);
    m1 += x * pn.probs[n];
    m2 += x * (x - 1.0) * pn.probs[n];
  }
  if (!(m1 > 0.0)) throw Error(ErrorKind::numeric, "distribution has zero mean");
  return m2 / (m1 * m1);
}

double g2_cross(const JointPhotonNumberDistribution& joint) {
  double ms = 0.0, mi = 0.0, mc = 0.0;
  for (Eigen::Index n = 0; n < joint.probs.rows(); ++n) {
    for (Eigen::Index m = 0; m < joint.probs.cols(); ++m) {
      const double p = joint.probs(n, m);
      ms += static_cast<double>(n) * p;
      mi += static_cast<double>(m) * p;
      mc += static_cast<double>(n) * static_cast<double>(m) * p;
    }
  }
  if (!(ms > 0.0 && mi > 0.0)) throw Error(ErrorKind::numeric, "a marginal has zero mean");
  return mc / (ms * mi);
}

std::vector<TheoryPoint> theory_curves(std::span<const double> mean_photons) {
  std::vector<TheoryPoint> out;
  out.reserve(mean_photons.size());
  for (double n : mean_photons) {
    if (!(n > 0.0)) throw Error(ErrorKind::argument, "theory curves need <n> > 0");
    out.push_back({n, 2.0 + 1.0 / n, 2.0, 3.0 + 1.0 / n});
  }
  return out;
}

PhotonNumberDistribution apply_binomial_loss(const PhotonNumberDistribution& pn, double efficiency) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw Error(ErrorKind::argument, "efficiency must be in [0, 1]");
  const std::size_t nmax = pn.probs.size();
  std::vector<double> out(nmax, 0.0);
  if (efficiency == 1.0) {
    out = pn.probs;
  } else if (efficiency == 0.0) {
    if (nmax) out[0] = pn.total();
  } else {
    const double le = std::log(efficiency);
    const double ll = std::log1p(-efficiency);
    for (std::size_t n = 0; n < nmax; ++n) {
      if (pn.probs[n] == 0.0) continue;
      for (std::size_t m = 0; m <= n; ++m) {
        const auto un = static_cast<unsigned>(n), um = static_cast<unsigned>(m);
        out[m] += pn.probs[n] *
                  std::exp(log_choose(un, um) + static_cast<double>(m) * le + static_cast<double>(n - m) * ll);
      }
    }
  }
  return PhotonNumberDistribution{std::move(out), pn.truncated};
}

double mean_photons_to_squeezing_db(double mean_photons) {
  check_mean(mean_photons);
  const double r = std::asinh(std::sqrt(mean_photons));
  return 20.0 * r * std::numbers::log10e;
}

std::vector<double> fock_beamsplitter(unsigned n_a, unsigned n_b) {
  // a† → (c† + d†)/√2, b† → (c† − d†)/√2. Expand (c†+d†)^{n_a}(c†−d†)^{n_b} and collect c†^k d†^{N−k}.
  const unsigned total = n_a + n_b;
  std::vector<double> p(total + 1, 0.0);
  const double norm = -0.5 * total * std::numbers::ln2 - 0.5 * (std::lgamma(n_a + 1.0) + std::lgamma(n_b + 1.0));
  for (unsigned k = 0; k <= total; ++k) {
    double coef = 0.0;
    for (unsigned i = 0; i <= std::min(k, n_a); ++i) {
      const unsigned j = k - i;
      if (j > n_b) continue;
      const double sign = ((n_b - j) % 2 == 0) ? 1.0 : -1.0;
      coef += sign * std::exp(log_choose(n_a, i) + log_choose(n_b, j));
    }
    const double amp_log = norm + 0.5 * (std::lgamma(k + 1.0) + std::lgamma(total - k + 1.0));
    const double amp = coef * std::exp(amp_log);
    p[k] = amp * amp;
  }
  return p;
}

std::pair<PhotonNumberDistribution, PhotonNumberDistribution> beamsplitter_mix(
    const JointPhotonNumberDistribution& tmsv, std::size_t nmax) {
  const auto& p = tmsv.probs;
  if (p.rows() < 3 || p.rows() != p.cols()) throw Error(ErrorKind::unsupported_input, "input is not a TMSV distribution");
  for (Eigen::Index n = 0; n < p.rows(); ++n)
    for (Eigen::Index m = 0; m < p.cols(); ++m)
      if (n != m && std::abs(p(n, m)) > 1e-15)
        throw Error(ErrorKind::unsupported_input, "input is not photon-number correlated");
  if (!(p(0, 0) > 0.0)) throw Error(ErrorKind::unsupported_input, "input has no vacuum component");
  // Geometric check: p_{n+1}/p_n must be constant (single Schmidt mode).
  const double ratio = p(1, 1) / p(0, 0);
  for (Eigen::Index n = 1; n + 1 < p.rows(); ++n) {
    const double expect = p(n, n) * ratio;
    if (std::abs(p(n + 1, n + 1) - expect) > 1e-9 * std::max(p(0, 0), 1e-300))
      throw Error(ErrorKind::unsupported_input, "multimode input is not supported");
  }
  if (!(ratio < 1.0)) throw Error(ErrorKind::unsupported_input, "input is not normalisable");
  const double mu = ratio / (1.0 - ratio);
  auto port = smsv_pn(mu, nmax);
  return {port, port};
}

PhotonNumberDistribution apply_polarization_leakage(const JointPhotonNumberDistribution& joint, double leakage) {
  if (!(leakage >= 0.0 && leakage <= 1.0)) throw Error(ErrorKind::argument, "leakage must be in [0, 1]");
  const auto rows = static_cast<std::size_t>(joint.probs.rows());
  const auto cols = static_cast<std::size_t>(joint.probs.cols());
  std::vector<double> out(rows + cols - 1, 0.0);
  for (std::size_t m = 0; m < cols; ++m) {
    std::vector<double> spill(m + 1, 0.0);
    spill[0] = 1.0;
    if (leakage > 0.0) {
      PhotonNumberDistribution v{std::vector<double>(m + 1, 0.0), false};
      v.probs[m] = 1.0;
      spill = apply_binomial_loss(v, leakage).probs;
    }
    for (std::size_t n = 0; n < rows; ++n) {
      const double p = joint.probs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
      if (p == 0.0) continue;
      for (std::size_t k = 0; k <= m; ++k) out[n + k] += p * spill[k];
    }
  }
  return PhotonNumberDistribution{std::move(out), joint.truncated};
}

void write_csv(std::ostream& out, const PhotonNumberDistribution& pn) {
  CsvWriter w(out);
  if (pn.truncated) w.comment("truncated: tail mass beyond nmax exceeds 1e-9");
  w.header({"n", "p_n"});
  for (std::size_t n = 0; n < pn.probs.size(); ++n) w.row({static_cast<double>(n), pn.probs[n]});
}

void write_csv(std::ostream& out, const JointPhotonNumberDistribution& joint) {
  CsvWriter w(out);
  if (joint.truncated) w.comment("truncated: tail mass beyond nmax exceeds 1e-9");
  w.header({"n", "m", "p_nm"});
  for (Eigen::Index n = 0; n < joint.probs.rows(); ++n)
    for (Eigen::Index m = 0; m < joint.probs.cols(); ++m)
      w.row({static_cast<double>(n), static_cast<double>(m), joint.probs(n, m)});
}

void write_csv(std::ostream& out, std::span<const TheoryPoint> curve) {
  CsvWriter w(out);
  w.header({"mean_photons", "g2_hv", "g2_hh", "g2_cc"});
  for (const auto& p : curve) w.row({p.mean_photons, p.g2_hv, p.g2_hh, p.g2_cc});
}

}  // namespace sqz
