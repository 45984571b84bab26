#include "sqz/stats_uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sqz/errors.hpp"
#include "sqz/jsa_model.hpp"
#include "sqz/parallel.hpp"
#include "sqz/rng.hpp"

namespace sqz {

double histogram_kabs(const Histogram2D& hist) {
  hist.validate();
  if (!(hist.total() > 0.0)) throw Error(ErrorKind::argument, "histogram is empty");
  return k_abs(RealMatrix(hist.counts.cwiseSqrt()));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::argument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_kabs(const Histogram2D& hist, std::size_t n_resamples, std::uint64_t seed) {
  if (n_resamples < 100) throw Error(ErrorKind::argument, "bootstrap needs at least 100 resamples");
  BootstrapResult out;
  out.estimate = histogram_kabs(hist);
  out.resamples = n_resamples;
  out.samples.assign(n_resamples, 0.0);
  parallel_for(n_resamples, [&](std::size_t r) {
    Rng rng = make_rng(seed, kStreamBootstrap, r);
    RealMatrix m(hist.counts.rows(), hist.counts.cols());
    double total = 0.0;
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        const double lambda = hist.counts(j, k);
        double x = 0.0;
        if (lambda > 0.0) x = static_cast<double>(std::poisson_distribution<long long>(lambda)(rng));
        m(j, k) = std::sqrt(x);
        total += x;
      }
    }
    // An all-empty resample carries no shape information; it is as separable as it gets.
    out.samples[r] = total > 0.0 ? k_abs(m) : 1.0;
  });
  const double n = static_cast<double>(n_resamples);
  const double mean = std::accumulate(out.samples.begin(), out.samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : out.samples) ss += (x - mean) * (x - mean);
  out.sigma = std::sqrt(ss / (n - 1.0));
  out.bias = mean - out.estimate;
  out.median = quantile(out.samples, 0.5);
  out.lower = quantile(out.samples, 0.025);
  out.upper = quantile(out.samples, 0.975);
  out.basic_lower = 2.0 * out.estimate - out.upper;
  out.basic_upper = 2.0 * out.estimate - out.lower;
  return out;
}

double ratio_sigma(double n1, double n2) {
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw Error(ErrorKind::numeric, "ratio needs positive counts");
  const double r = n1 / n2;
  return r * std::sqrt(1.0 / n1 + 1.0 / n2);
}

Estimate visibility_from_counts(double a, double b) {
  if (!(b > 0.0) || a < 0.0) throw Error(ErrorKind::numeric, "visibility needs a positive baseline count");
  const double r = a / b;
  // σ² = r²(1/a + 1/b), written so that a = 0 stays finite.
  return {1.0 - r, std::sqrt(a / (b * b) + a * a / (b * b * b))};
}

double propagate_poisson(const std::function<double(std::span<const double>)>& f, std::span<const double> counts) {
  std::vector<double> x(counts.begin(), counts.end());
  if (!std::isfinite(f(x))) throw Error(ErrorKind::numeric, "expression is not finite at the observed counts");
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0) throw Error(ErrorKind::argument, "counts must be non-negative");
    if (x[i] == 0.0) continue;
    const double h = 1e-4 * x[i];
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    const double d = (up - down) / (2.0 * h);
    if (!std::isfinite(d)) throw Error(ErrorKind::numeric, "expression derivative is not finite");
    var += d * d * keep;
  }
  return std::sqrt(var);
}

Estimate g2_from_samples(std::span<const std::uint32_t> counts) {
  if (counts.size() < 2) throw Error(ErrorKind::insufficient_statistics, "need at least two samples");
  std::uint64_t s1 = 0, s2 = 0, s11 = 0, s12 = 0, s22 = 0;
  for (std::uint32_t c : counts) {
    const std::uint64_t n = c;
    const std::uint64_t f = n * (n > 0 ? n - 1 : 0);
    s1 += n;
    s2 += f;
    s11 += n * n;
    s12 += n * f;
    s22 += f * f;
  }
  const double N = static_cast<double>(counts.size());
  const double m1 = static_cast<double>(s1) / N, m2 = static_cast<double>(s2) / N;
  if (!(m1 > 0.0)) throw Error(ErrorKind::numeric, "no photons recorded");
  const double v11 = static_cast<double>(s11) / N - m1 * m1;
  const double v12 = static_cast<double>(s12) / N - m1 * m2;
  const double v22 = static_cast<double>(s22) / N - m2 * m2;
  const double g = m2 / (m1 * m1);
  const double d1 = -2.0 * m2 / (m1 * m1 * m1), d2 = 1.0 / (m1 * m1);
  const double var = (d1 * d1 * v11 + 2.0 * d1 * d2 * v12 + d2 * d2 * v22) / N;
  return {g, std::sqrt(std::max(0.0, var))};
}

Estimate g2_cross_from_samples(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorKind::argument, "paired samples must have equal length");
  // Moments of x = a, y = b, z = ab.
  double sx = 0, sy = 0, sz = 0, sxx = 0, syy = 0, szz = 0, sxy = 0, sxz = 0, syz = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i], z = x * y;
    sx += x, sy += y, sz += z;
    sxx += x * x, syy += y * y, szz += z * z;
    sxy += x * y, sxz += x * z, syz += y * z;
  }
  const double N = static_cast<double>(a.size());
  const double mx = sx / N, my = sy / N, mz = sz / N;
  if (!(mx > 0.0 && my > 0.0)) throw Error(ErrorKind::numeric, "a channel recorded no photons");
  const double g = mz / (mx * my);
  const double gx = -g / mx, gy = -g / my, gz = 1.0 / (mx * my);
  const double cxx = sxx / N - mx * mx, cyy = syy / N - my * my, czz = szz / N - mz * mz;
  const double cxy = sxy / N - mx * my, cxz = sxz / N - mx * mz, cyz = syz / N - my * mz;
  const double var = (gx * gx * cxx + gy * gy * cyy + gz * gz * czz + 2.0 * (gx * gy * cxy + gx * gz * cxz + gy * gz * cyz)) / N;
  return {g, std::sqrt(std::max(0.0, var))};
}

}  // namespace sqz
