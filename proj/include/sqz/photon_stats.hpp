#pragma once

// Photon-number statistics of single- and two-mode squeezed vacua, loss, and the
// zero-delay g² estimators built on them.

#include <cstddef>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sqz {

inline constexpr std::size_t kDefaultNmax = 32;
inline constexpr double kTruncationTolerance = 1e-9;

struct PhotonNumberDistribution {
  std::vector<double> probs;  // p_0 … p_nmax
  bool truncated = false;     // tail beyond nmax exceeds kTruncationTolerance

  std::size_t nmax() const { return probs.empty() ? 0 : probs.size() - 1; }
  double total() const;
  double mean() const;
};

struct JointPhotonNumberDistribution {
  Eigen::MatrixXd probs;  // [signal count][idler count]
  bool truncated = false;

  PhotonNumberDistribution signal_marginal() const;
  PhotonNumberDistribution idler_marginal() const;
};

struct SqueezerSpec {
  double mean_total_photons = 0.11;  // per beam per pulse, summed over modes
  std::vector<double> schmidt_weights{1.0};

  void validate() const;
};

PhotonNumberDistribution poisson_pn(double mean, std::size_t nmax = kDefaultNmax);
PhotonNumberDistribution thermal_pn(double mean, std::size_t nmax = kDefaultNmax);

/// Single-mode TMSV: p_{n,n} = μⁿ/(1+μ)^{n+1}. Throws Error(argument) for more than one weight.
JointPhotonNumberDistribution tmsv_joint_pn(const SqueezerSpec& spec, std::size_t nmax = kDefaultNmax);

/// Per-mode mean photon numbers μ_n = sinh²(c·√λ_n), with c fixed by Σ μ_n = ⟨n⟩.
std::vector<double> per_mode_means(const SqueezerSpec& spec);

/// Independent TMSV per Schmidt mode, convolved. The result is diagonal.
JointPhotonNumberDistribution multimode_joint_pn(const SqueezerSpec& spec, std::size_t nmax = kDefaultNmax);

/// p_{2m} = (2m)!/(2^{2m}(m!)²)·tanh^{2m}r / cosh r, sinh²r = mean_photons.
PhotonNumberDistribution smsv_pn(double mean_photons, std::size_t nmax = kDefaultNmax);

/// Σ n(n−1)p_n / (Σ n p_n)²
double g2_from_pn(const PhotonNumberDistribution& pn);
/// ⟨n m⟩ / (⟨n⟩⟨m⟩) for two distinct modes.
double g2_cross(const JointPhotonNumberDistribution& joint);

struct TheoryPoint {
  double mean_photons;
  double g2_hv;  // 2 + 1/⟨n⟩
  double g2_hh;  // 2
  double g2_cc;  // 3 + 1/⟨n⟩
};
std::vector<TheoryPoint> theory_curves(std::span<const double> mean_photons);

/// p'_m = Σ_{n≥m} p_n C(n,m) η^m (1−η)^{n−m}
PhotonNumberDistribution apply_binomial_loss(const PhotonNumberDistribution& pn, double efficiency);

/// Squeezing in dB for a given mean photon number, 20·r·log₁₀e with r = asinh(√⟨n⟩).
double mean_photons_to_squeezing_db(double mean_photons);

/// Interferes the two arms of a single-mode TMSV on a balanced beam splitter and returns the
/// photon-number distribution of each output port. Only geometric (single Schmidt mode) input
/// is supported; anything else throws Error(unsupported_input).
std::pair<PhotonNumberDistribution, PhotonNumberDistribution> beamsplitter_mix(
    const JointPhotonNumberDistribution& tmsv, std::size_t nmax = kDefaultNmax);

/// Photon-number distribution of output port c when |n_a, n_b⟩ meets a balanced beam splitter
/// (indices 0 … n_a + n_b). Port d holds the remainder.
std::vector<double> fock_beamsplitter(unsigned n_a, unsigned n_b);

/// H-port photon number when each V photon leaks into the H detection mode with probability ε.
PhotonNumberDistribution apply_polarization_leakage(const JointPhotonNumberDistribution& joint, double leakage);

void write_csv(std::ostream& out, const PhotonNumberDistribution& pn);
void write_csv(std::ostream& out, const JointPhotonNumberDistribution& joint);
void write_csv(std::ostream& out, std::span<const TheoryPoint> curve);

}  // namespace sqz
