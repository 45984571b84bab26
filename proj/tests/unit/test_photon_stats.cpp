#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sqz/errors.hpp"
#include "sqz/photon_stats.hpp"

using namespace sqz;

namespace {

SqueezerSpec single(double mu) {
  SqueezerSpec s;
  s.mean_total_photons = mu;
  return s;
}

PhotonNumberDistribution fock(std::size_t n) {
  PhotonNumberDistribution p;
  p.probs.assign(n + 1, 0.0);
  p.probs[n] = 1.0;
  return p;
}

}  // namespace

TEST_CASE("tmsv ladder") {
  auto vac = tmsv_joint_pn(single(0.0));
  CHECK(vac.probs(0, 0) == 1.0);

  auto one = tmsv_joint_pn(single(1.0), 40);
  for (int n = 0; n < 10; ++n) CHECK(one.probs(n, n) == doctest::Approx(std::pow(0.5, n + 1)));
  CHECK(one.probs(1, 2) == 0.0);

  auto at_011 = tmsv_joint_pn(single(0.11));
  CHECK(at_011.probs(1, 1) == doctest::Approx(0.11 / (1.11 * 1.11)).epsilon(1e-12));
  CHECK(at_011.probs(1, 1) == doctest::Approx(0.08927).epsilon(1e-4));

  SqueezerSpec two;
  two.schmidt_weights = {0.5, 0.5};
  CHECK_THROWS_AS(tmsv_joint_pn(two), Error);
}

TEST_CASE("truncation flag") {
  CHECK(tmsv_joint_pn(single(2.0), 32).truncated);
  CHECK_FALSE(tmsv_joint_pn(single(2.0), 128).truncated);
  CHECK_FALSE(tmsv_joint_pn(single(0.11), 32).truncated);
}

TEST_CASE("multimode reduces to single mode for one weight") {
  const auto a = tmsv_joint_pn(single(0.3));
  const auto b = multimode_joint_pn(single(0.3));
  CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("two equal modes match brute-force enumeration") {
  SqueezerSpec s;
  s.mean_total_photons = 0.2;
  s.schmidt_weights = {0.5, 0.5};
  const auto mus = per_mode_means(s);
  REQUIRE(mus.size() == 2);
  CHECK(mus[0] == doctest::Approx(0.1).epsilon(1e-12));
  const auto joint = multimode_joint_pn(s);
  const auto ref = oracle::two_mode_convolution(0.1, 0.1, 6);
  for (int n = 0; n <= 6; ++n) CHECK(joint.probs(n, n) == doctest::Approx(ref[n]).epsilon(1e-12));
}

TEST_CASE("per-mode means scale as sinh² of the gain and sum to the total") {
  SqueezerSpec s;
  s.mean_total_photons = 0.5;
  s.schmidt_weights = {0.6, 0.3, 0.1};
  const auto mus = per_mode_means(s);
  double sum = 0.0;
  for (double m : mus) sum += m;
  CHECK(sum == doctest::Approx(0.5).epsilon(1e-12));
  const double c = std::asinh(std::sqrt(mus[0])) / std::sqrt(0.6);
  CHECK(mus[2] == doctest::Approx(std::pow(std::sinh(c * std::sqrt(0.1)), 2)).epsilon(1e-10));
}

TEST_CASE("K equal modes at low gain give marginal g2 = 1 + 1/K") {
  double previous = 3.0;
  for (int k = 1; k <= 5; ++k) {
    SqueezerSpec s;
    s.mean_total_photons = 0.02;
    s.schmidt_weights.assign(k, 1.0 / k);
    const double g2 = g2_from_pn(multimode_joint_pn(s).signal_marginal());
    CHECK(g2 == doctest::Approx(1.0 + 1.0 / k).epsilon(0.02));
    CHECK(g2 < previous);
    previous = g2;
  }
}

TEST_CASE("smsv against the squeeze-operator matrix exponential") {
  for (double mu : {0.11, 0.5, 1.5}) {
    const auto p = smsv_pn(mu, 40);
    const auto ref = oracle::squeezed_vacuum_pn(std::asinh(std::sqrt(mu)));
    for (int n = 0; n <= 40; ++n) CHECK(p.probs[n] == doctest::Approx(ref[n]).epsilon(1e-9).scale(1e-12));
    for (int n = 1; n <= 40; n += 2) CHECK(p.probs[n] == 0.0);
  }
  CHECK(smsv_pn(1e-12).probs[0] == doctest::Approx(1.0));
}

TEST_CASE("g2 of reference states") {
  CHECK(g2_from_pn(poisson_pn(0.7, 60)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g2_from_pn(thermal_pn(0.3, 80)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g2_from_pn(fock(2)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(g2_from_pn(fock(0)), Error);

  CHECK(g2_cross(tmsv_joint_pn(single(0.1))) == doctest::Approx(12.0).epsilon(1e-9));
  CHECK(g2_cross(tmsv_joint_pn(single(1.0), 80)) == doctest::Approx(3.0).epsilon(1e-9));

  // Independent modes: outer product of two Poisson marginals.
  const auto a = poisson_pn(0.4, 30), b = poisson_pn(0.9, 30);
  JointPhotonNumberDistribution ind;
  ind.probs.resize(31, 31);
  for (int n = 0; n <= 30; ++n)
    for (int m = 0; m <= 30; ++m) ind.probs(n, m) = a.probs[n] * b.probs[m];
  CHECK(g2_cross(ind) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("theory curves") {
  const std::vector<double> mus{0.11, 1.0, 1e4};
  const auto c = theory_curves(mus);
  CHECK(c[0].g2_hv == doctest::Approx(2.0 + 1.0 / 0.11));
  CHECK(c[0].g2_hh == 2.0);
  CHECK(c[0].g2_cc == doctest::Approx(3.0 + 1.0 / 0.11));
  CHECK(c[1].g2_hv == doctest::Approx(3.0));
  CHECK(c[1].g2_cc == doctest::Approx(4.0));
  CHECK(c[2].g2_hv == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(c[2].g2_cc == doctest::Approx(3.0).epsilon(1e-3));
  CHECK_THROWS_AS(theory_curves(std::vector<double>{0.0}), Error);
}

TEST_CASE("binomial loss") {
  const auto th = thermal_pn(0.8, 120);
  const auto same = apply_binomial_loss(th, 1.0);
  for (std::size_t n = 0; n < th.probs.size(); ++n) CHECK(same.probs[n] == doctest::Approx(th.probs[n]));
  CHECK(apply_binomial_loss(th, 0.0).probs[0] == doctest::Approx(th.total()));
  // Thermal stays thermal with the mean scaled by η.
  const auto lossy = apply_binomial_loss(th, 0.3);
  const auto ref = thermal_pn(0.24, 120);
  for (int n = 0; n < 20; ++n) CHECK(lossy.probs[n] == doctest::Approx(ref.probs[n]).epsilon(1e-9));
  CHECK_THROWS_AS(apply_binomial_loss(th, 1.2), Error);
}

TEST_CASE("g2 is unchanged by binomial loss") {
  SqueezerSpec three;
  three.mean_total_photons = 0.4;
  three.schmidt_weights = {0.7, 0.2, 0.1};
  const std::vector<PhotonNumberDistribution> states{
      thermal_pn(0.5, 100), smsv_pn(0.5, 100), poisson_pn(0.5, 100), fock(3),
      multimode_joint_pn(three, 100).signal_marginal()};
  for (const auto& pn : states) {
    const double g = g2_from_pn(pn);
    for (double eta : {0.1, 0.5, 0.95}) CHECK(std::abs(g2_from_pn(apply_binomial_loss(pn, eta)) - g) < 1e-9);
  }
}

TEST_CASE("squeezing in dB") {
  CHECK(mean_photons_to_squeezing_db(0.0) == 0.0);
  CHECK(mean_photons_to_squeezing_db(0.11) == doctest::Approx(2.8).epsilon(0.05 / 2.8));
  const double s = std::sinh(1.0);
  CHECK(mean_photons_to_squeezing_db(s * s) == doctest::Approx(20.0 / std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("beam-splitter mix of a TMSV gives squeezed vacuum in each port") {
  for (double mu : {0.05, 0.5}) {
    const auto [c, d] = beamsplitter_mix(tmsv_joint_pn(single(mu), 60), 30);
    const auto ref = smsv_pn(mu, 30);
    for (int n = 0; n <= 30; ++n) {
      CHECK(c.probs[n] == doctest::Approx(ref.probs[n]).epsilon(1e-9).scale(1e-12));
      CHECK(d.probs[n] == doctest::Approx(ref.probs[n]).epsilon(1e-9).scale(1e-12));
    }
    CHECK(g2_from_pn(beamsplitter_mix(tmsv_joint_pn(single(mu), 120), 120).first) ==
          doctest::Approx(3.0 + 1.0 / mu).epsilon(1e-9));
  }
  const auto [c0, d0] = beamsplitter_mix(tmsv_joint_pn(single(1e-9)));
  CHECK(c0.probs[0] == doctest::Approx(1.0));

  SqueezerSpec two;
  two.mean_total_photons = 0.2;
  two.schmidt_weights = {0.5, 0.5};
  CHECK_THROWS_AS(beamsplitter_mix(multimode_joint_pn(two)), Error);
}

TEST_CASE("number-basis beam splitter against the unitary exponential") {
  const auto hom = fock_beamsplitter(1, 1);
  CHECK(hom[0] == doctest::Approx(0.5));
  CHECK(hom[1] == doctest::Approx(0.0).scale(1e-12));
  CHECK(hom[2] == doctest::Approx(0.5));
  for (unsigned a = 0; a <= 6; ++a)
    for (unsigned b = 0; b <= 6; ++b) {
      const auto p = fock_beamsplitter(a, b);
      const auto ref = oracle::beamsplitter_port_pn(a, b);
      REQUIRE(p.size() == ref.size());
      for (std::size_t k = 0; k < p.size(); ++k) CHECK(p[k] == doctest::Approx(ref[k]).epsilon(1e-9).scale(1e-12));
    }
}

TEST_CASE("polarisation leakage") {
  const auto joint = tmsv_joint_pn(single(0.3), 60);
  const auto h = apply_polarization_leakage(joint, 0.0);
  const auto m = joint.signal_marginal();
  for (std::size_t n = 0; n < m.probs.size(); ++n) CHECK(h.probs[n] == doctest::Approx(m.probs[n]));
  // Full leakage doubles every photon number.
  const auto full = apply_polarization_leakage(joint, 1.0);
  CHECK(full.probs[2] == doctest::Approx(m.probs[1]));
  CHECK(full.probs[1] == doctest::Approx(0.0).scale(1e-15));
}
