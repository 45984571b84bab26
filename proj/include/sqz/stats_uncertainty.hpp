#pragma once

// Parametric bootstrap for K_ABS and first-order Poisson error propagation.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sqz/tag_pipeline.hpp"

namespace sqz {

struct BootstrapResult {
  double estimate = 0.0;  // K_ABS of the observed histogram
  std::size_t resamples = 0;
  double sigma = 0.0;
  double median = 0.0;
  // Percentile interval (2.5 %, 97.5 %) of the resampled K_ABS.
  double lower = 0.0;
  double upper = 0.0;
  // Basic (bias-reflected) interval [2θ̂ − q97.5, 2θ̂ − q2.5]. K_ABS from √counts is biased
  // upward by shot noise; reflecting through the estimate undoes that bias to first order.
  double basic_lower = 0.0;
  double basic_upper = 0.0;
  double bias = 0.0;  // mean of resamples − estimate
  std::vector<double> samples;
};

inline constexpr std::size_t kDefaultResamples = 1000;

/// Resamples every bin from Poisson(observed) and recomputes K_ABS of √counts. Throws
/// Error(argument) for an empty histogram or fewer than 100 resamples.
BootstrapResult bootstrap_kabs(const Histogram2D& hist, std::size_t n_resamples = kDefaultResamples,
                               std::uint64_t seed = 0);

/// K_ABS of a histogram, computed on √counts.
double histogram_kabs(const Histogram2D& hist);

/// σ of N1/N2 for independent Poisson counts.
double ratio_sigma(double n1, double n2);
/// 1 − a/b with σ for independent Poisson a, b.
Estimate visibility_from_counts(double a, double b);

/// First-order propagation σ² = Σ (∂f/∂N_i)² N_i with central differences. Throws
/// Error(numeric) when f is not finite at the counts.
double propagate_poisson(const std::function<double(std::span<const double>)>& f, std::span<const double> counts);

/// Eq.-style g² = ⟨n(n−1)⟩/⟨n⟩² from per-pulse photon numbers, σ by the delta method.
Estimate g2_from_samples(std::span<const std::uint32_t> counts);
/// ⟨n m⟩/(⟨n⟩⟨m⟩) from paired samples, σ by the delta method.
Estimate g2_cross_from_samples(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Type-7 sample quantile (linear interpolation), q ∈ [0, 1]. Input need not be sorted.
double quantile(std::vector<double> values, double q);

}  // namespace sqz
