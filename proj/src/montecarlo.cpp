#include "sqz/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sqz/csv.hpp"
#include "sqz/errors.hpp"
#include "sqz/parallel.hpp"
#include "sqz/rng.hpp"
#include "sqz/units.hpp"

namespace sqz {

namespace {

std::uint64_t block_count(std::uint64_t n_pulses) { return (n_pulses + kPulsesPerBlock - 1) / kPulsesPerBlock; }

// Calls fn(block, first_pulse, end_pulse) for every block, possibly concurrently.
template <typename Fn>
void for_blocks(std::uint64_t n_pulses, Fn&& fn) {
  const std::uint64_t nb = block_count(n_pulses);
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) {
    const std::uint64_t first = static_cast<std::uint64_t>(b) * kPulsesPerBlock;
    fn(static_cast<std::uint64_t>(b), first, std::min(n_pulses, first + kPulsesPerBlock));
  });
}

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::uint32_t binomial(Rng& rng, std::uint32_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  // Photon numbers per pulse are small; Bernoulli trials beat constructing a distribution.
  if (n <= 16) {
    std::uint32_t k = 0;
    for (std::uint32_t i = 0; i < n; ++i) k += uniform(rng) < p;
    return k;
  }
  return static_cast<std::uint32_t>(std::binomial_distribution<std::uint32_t>(n, p)(rng));
}

// Poisson source with a fixed mean, sampled by inversion from a cached P(0).
class PoissonSource {
 public:
  explicit PoissonSource(double mean) : mean_(mean), p0_(std::exp(-mean)) {}
  std::uint32_t operator()(Rng& rng) const {
    if (mean_ <= 0.0) return 0;
    double u = uniform(rng);
    double p = p0_;
    std::uint32_t k = 0;
    while (u > p && k < 1000) {
      u -= p;
      ++k;
      p *= mean_ / k;
    }
    return k;
  }

 private:
  double mean_;
  double p0_;
};

// Pair numbers per Schmidt mode.
class PairSampler {
 public:
  explicit PairSampler(const RunConfig& cfg) : statistics_(cfg.statistics) {
    const auto& w = cfg.source.schmidt_weights;
    if (statistics_ == PairStatistics::single_pair) {
      p_single_ = std::min(1.0, cfg.source.mean_total_photons);
      mode_pick_ = std::discrete_distribution<std::uint32_t>(w.begin(), w.end());
      return;
    }
    const auto mu = per_mode_means(cfg.source);
    // Drop the far tail of negligible modes; they cannot change counts at any realistic run size.
    double cum = 0.0;
    for (std::size_t n = 0; n < mu.size(); ++n) {
      if (mu[n] > 0.0) {
        const double q = mu[n] / (1.0 + mu[n]);
        occupied_.push_back(q);
        geometric_.emplace_back(1.0 - q);
        index_.push_back(static_cast<std::uint32_t>(n));
      }
      cum += w[n];
      if (cum >= 1.0 - 1e-12) break;
    }
    // tail_empty_[i] = P(no pair in modes i…end), for sampling conditioned on "some pair".
    tail_empty_.assign(occupied_.size() + 1, 1.0);
    for (std::size_t i = occupied_.size(); i-- > 0;) tail_empty_[i] = tail_empty_[i + 1] * (1.0 - occupied_[i]);
  }

  // Appends the mode index of every pair to `modes` (if given) and returns the pair count.
  std::uint32_t draw(Rng& rng, std::vector<std::uint32_t>* modes) {
    if (statistics_ == PairStatistics::single_pair) {
      if (!(uniform(rng) < p_single_)) return 0;
      const std::uint32_t m = mode_pick_(rng);
      if (modes) modes->push_back(m);
      return 1;
    }
    // Most pulses are empty: one draw decides that, then modes are scanned conditionally.
    if (!(uniform(rng) < 1.0 - tail_empty_[0])) return 0;
    std::uint32_t total = 0;
    for (std::size_t i = 0; i < occupied_.size(); ++i) {
      const double p = total == 0 ? occupied_[i] / (1.0 - tail_empty_[i]) : occupied_[i];
      if (!(uniform(rng) < p)) continue;
      // Geometric is memoryless: given ≥ 1 pair, the excess is geometric again.
      const std::uint32_t k = 1 + static_cast<std::uint32_t>(geometric_[i](rng));
      total += k;
      if (modes) modes->insert(modes->end(), k, index_[i]);
    }
    return total;
  }

 private:
  PairStatistics statistics_;
  double p_single_ = 0.0;
  std::discrete_distribution<std::uint32_t> mode_pick_;
  std::vector<double> occupied_;
  std::vector<std::geometric_distribution<std::uint32_t>> geometric_;
  std::vector<std::uint32_t> index_;
  std::vector<double> tail_empty_;
};

// Draws (ω_s, ω_i) from |Ψ|², uniform within the chosen grid cell.
class SpectralSampler {
 public:
  explicit SpectralSampler(const JointSpectralAmplitude& jsa) : grid_(jsa.grid) {
    const auto& a = jsa.amplitude;
    cdf_.resize(static_cast<std::size_t>(a.size()));
    double acc = 0.0;
    std::size_t i = 0;
    for (Eigen::Index j = 0; j < a.rows(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) cdf_[i++] = (acc += std::norm(a(j, k)));
  }

  std::pair<double, double> draw(Rng& rng) const {
    const double u = uniform(rng) * cdf_.back();
    auto idx = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    idx = std::min(idx, cdf_.size() - 1);
    const std::size_t j = idx / grid_.n_idler, k = idx % grid_.n_idler;
    const double ws = grid_.signal_at(j) + (uniform(rng) - 0.5) * grid_.signal_step();
    const double wi = grid_.idler_at(k) + (uniform(rng) - 0.5) * grid_.idler_step();
    return {ws, wi};
  }

 private:
  FrequencyGrid grid_;
  std::vector<double> cdf_;
};

// Port-c photon-number CDFs for |N, N⟩ on a balanced beam splitter, N = 0 … kMaxFockPairs.
const std::vector<std::vector<double>>& fock_table() {
  static const auto table = [] {
    std::vector<std::vector<double>> t(kMaxFockPairs + 1);
    for (unsigned n = 0; n <= kMaxFockPairs; ++n) {
      auto p = fock_beamsplitter(n, n);
      for (std::size_t k = 1; k < p.size(); ++k) p[k] += p[k - 1];
      t[n] = std::move(p);
    }
    return t;
  }();
  return table;
}

struct PortSplit {
  std::uint32_t c = 0;
  std::uint32_t d = 0;
  bool truncated = false;
};

// Routes N signal and N idler photons through the HOM beam splitter.
PortSplit hom_split(Rng& rng, std::uint32_t pairs, double p_indistinguishable) {
  PortSplit s;
  if (pairs == 0) return s;
  const std::uint32_t total = 2 * pairs;
  const bool ind = uniform(rng) < p_indistinguishable;
  if (ind && pairs <= kMaxFockPairs) {
    const auto& cdf = fock_table()[pairs];
    const double u = uniform(rng) * cdf.back();
    s.c = static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    s.c = std::min(s.c, total);
  } else {
    s.truncated = ind;
    s.c = binomial(rng, total, 0.5);
  }
  s.d = total - s.c;
  return s;
}

// Single-pair overlap model for the HOM beam splitter.
struct HomModel {
  std::optional<JointSpectralAmplitude> jsa;
  double dip_ps = 0.0;

  explicit HomModel(const RunConfig& cfg) {
    if (!cfg.jsa) return;
    jsa = apply_filter(*cfg.jsa, cfg.filter_signal, cfg.filter_idler).jsa;
    if (cfg.hom_delays_relative_to_dip) dip_ps = hom_dip_delay(*jsa, -20e-12, 20e-12) * 1e12;
  }

  double absolute_delay(const RunConfig& cfg, double d) const { return cfg.hom_delays_relative_to_dip ? d + dip_ps : d; }

  // P_c per absolute delay; identical modes without a JSA.
  std::vector<double> coincidence(const std::vector<double>& delays_ps) const {
    if (!jsa) return std::vector<double>(delays_ps.size(), 0.0);
    std::vector<double> s(delays_ps.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = delays_ps[i] * 1e-12;
    return hom_curve(*jsa, s).coincidence_probability;
  }
};

double indistinguishable_fraction(double pc) { return std::clamp(1.0 - 2.0 * pc, 0.0, 1.0); }

struct Draft {
  std::uint64_t time;
  std::uint16_t channel;
  TagOrigin origin;
};

std::uint64_t to_ps(double t) { return t <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(t)); }

// Sorts drafts by time (stable, so ties keep generation order) and removes clicks that fall
// within a channel's dead time after its previous registered click.
std::uint64_t finish_drafts(std::vector<Draft>& drafts, double deadtime0_ps, double deadtime1_ps) {
  std::stable_sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) { return a.time < b.time; });
  std::vector<Draft> kept;
  kept.reserve(drafts.size());
  std::array<std::optional<std::uint64_t>, 2> last{};
  std::uint64_t lost = 0;
  for (const auto& d : drafts) {
    const std::size_t ch = d.channel == 0 ? 0 : 1;
    const double dead = ch == 0 ? deadtime0_ps : deadtime1_ps;
    if (last[ch] && static_cast<double>(d.time - *last[ch]) < dead) {
      ++lost;
      continue;
    }
    last[ch] = d.time;
    kept.push_back(d);
  }
  drafts = std::move(kept);
  return lost;
}

void add_darks(Rng& rng, std::vector<Draft>& out, std::uint16_t channel, const PoissonSource& darks, double t0_ps,
               double period_ps) {
  const std::uint32_t n = darks(rng);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back({to_ps(t0_ps + uniform(rng) * period_ps), channel, TagOrigin::dark});
}

}  // namespace

void RunConfig::validate() const {
  if (!(repetition_rate_hz > 0.0) || !std::isfinite(repetition_rate_hz))
    throw Error(ErrorKind::config, "repetition_rate must be positive");
  if (n_pulses == 0) throw Error(ErrorKind::config, "n_pulses must be positive");
  source.validate();
  if (jsa) jsa->validate();
  filter_signal.validate();
  filter_idler.validate();
  detector_signal.validate();
  detector_idler.validate();
  path_signal.model.validate();
  path_idler.model.validate();
  if (!(idler_delay_ps >= 0.0)) throw Error(ErrorKind::config, "idler delay must be non-negative");
  for (double e : tes_efficiencies)
    if (!(e >= 0.0 && e <= 1.0)) throw Error(ErrorKind::config, "TES efficiencies must be in [0, 1]");
  if (!(background_rate_per_pulse >= 0.0)) throw Error(ErrorKind::config, "background rate must be non-negative");
}

std::uint64_t PairSourceRun::multi_pair_pulses() const {
  std::uint64_t n = 0;
  for (std::size_t k = 2; k < pairs_per_pulse.size(); ++k) n += pairs_per_pulse[k];
  return n;
}

PairSourceRun simulate_pair_source(const RunConfig& cfg) {
  cfg.validate();
  PairSampler pairs(cfg);
  std::optional<SpectralSampler> spectral;
  if (cfg.jsa) spectral.emplace(*cfg.jsa);

  const auto nb = block_count(cfg.n_pulses);
  std::vector<std::vector<PairEmission>> parts(nb);
  std::vector<std::vector<std::uint64_t>> hist(nb);
  for_blocks(cfg.n_pulses, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
    Rng rng = make_rng(cfg.rng_seed, kStreamPairs, b);
    PairSampler local = pairs;
    std::vector<std::uint32_t> modes;
    auto& h = hist[b];
    for (std::uint64_t p = first; p < last; ++p) {
      modes.clear();
      const std::uint32_t n = local.draw(rng, &modes);
      if (h.size() <= n) h.resize(n + 1, 0);
      ++h[n];
      for (std::uint32_t m : modes) {
        PairEmission e{p, m, std::nan(""), std::nan("")};
        if (spectral) std::tie(e.omega_signal, e.omega_idler) = spectral->draw(rng);
        parts[b].push_back(e);
      }
    }
  });

  PairSourceRun out;
  out.n_pulses = cfg.n_pulses;
  for (std::uint64_t b = 0; b < nb; ++b) {
    out.emissions.insert(out.emissions.end(), parts[b].begin(), parts[b].end());
    if (out.pairs_per_pulse.size() < hist[b].size()) out.pairs_per_pulse.resize(hist[b].size(), 0);
    for (std::size_t k = 0; k < hist[b].size(); ++k) out.pairs_per_pulse[k] += hist[b][k];
  }
  return out;
}

TagRun simulate_tag_run(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.jsa) throw Error(ErrorKind::config, "tag simulation needs a joint spectral amplitude");
  PairSampler pairs(cfg);
  const SpectralSampler spectral(*cfg.jsa);
  const double period = cfg.clock_period_ps();
  const std::uint16_t idler_channel = cfg.time_multiplexed ? 0 : 1;
  const double idler_shift = cfg.time_multiplexed ? cfg.idler_delay_ps : 0.0;
  const PoissonSource dark_s(cfg.detector_signal.dark_rate_hz * period * 1e-12);
  const PoissonSource dark_i(cfg.detector_idler.dark_rate_hz * period * 1e-12);

  const auto nb = block_count(cfg.n_pulses);
  std::vector<std::vector<Draft>> parts(nb);
  std::vector<std::uint64_t> emitted(nb, 0);
  for_blocks(cfg.n_pulses, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
    Rng rng = make_rng(cfg.rng_seed, kStreamTags, b);
    PairSampler local = pairs;
    std::normal_distribution<double> jitter_s(0.0, cfg.detector_signal.jitter_sigma_ps());
    std::normal_distribution<double> jitter_i(0.0, cfg.detector_idler.jitter_sigma_ps());
    auto& out = parts[b];
    auto photon = [&](double omega, const SpectralFilter& filter, const DetectorModel& det, const SpectrometerPath& path,
                      std::normal_distribution<double>& jitter, double t_edge, std::uint16_t ch, TagOrigin origin) {
      const double lam_m = omega_to_wavelength(omega);
      if (!(uniform(rng) < filter.transmission(lam_m))) return;
      if (!(uniform(rng) < det.efficiency)) return;
      const double lam_nm = lam_m * 1e9;
      if (lam_nm < path.model.range_min_nm || lam_nm > path.model.range_max_nm) return;
      const double tof = path.model.delay(lam_nm) - path.model.coeffs[0];
      const double j = det.jitter_fwhm_ps > 0.0 ? jitter(rng) : 0.0;
      out.push_back({to_ps(t_edge + path.latency_ps + tof + j), ch, origin});
    };
    for (std::uint64_t p = first; p < last; ++p) {
      const double t_edge = static_cast<double>(p) * period;
      const std::uint32_t n = local.draw(rng, nullptr);
      emitted[b] += n;
      for (std::uint32_t k = 0; k < n; ++k) {
        const auto [ws, wi] = spectral.draw(rng);
        photon(ws, cfg.filter_signal, cfg.detector_signal, cfg.path_signal, jitter_s, t_edge, 0, TagOrigin::signal);
        photon(wi, cfg.filter_idler, cfg.detector_idler, cfg.path_idler, jitter_i, t_edge + idler_shift, idler_channel,
               TagOrigin::idler);
      }
      add_darks(rng, out, 0, dark_s, t_edge, period);
      if (!cfg.time_multiplexed) add_darks(rng, out, 1, dark_i, t_edge, period);
    }
  });

  std::vector<Draft> all;
  TagRun run;
  for (std::uint64_t b = 0; b < nb; ++b) {
    all.insert(all.end(), parts[b].begin(), parts[b].end());
    run.emitted_pairs += emitted[b];
  }
  run.deadtime_losses =
      finish_drafts(all, cfg.detector_signal.deadtime_ns * 1e3, cfg.detector_idler.deadtime_ns * 1e3);
  run.stream.clock_period_ps = period;
  run.stream.duration_s = static_cast<double>(cfg.n_pulses) / cfg.repetition_rate_hz;
  if (cfg.time_multiplexed) {
    run.stream.channel_names[0] = "snspd";
  } else {
    run.stream.channel_names[0] = "signal";
    run.stream.channel_names[1] = "idler";
  }
  run.stream.records.reserve(all.size());
  run.origin.reserve(all.size());
  for (const auto& d : all) {
    run.stream.records.push_back(make_tag(d.channel, d.time, period));
    run.origin.push_back(d.origin);
  }
  return run;
}

HomRun simulate_hom_run(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.hom_delays_ps.empty()) throw Error(ErrorKind::config, "HOM run needs a delay list");
  const HomModel model(cfg);
  PairSampler pairs(cfg);
  const double eta_c = cfg.tes_efficiencies[0], eta_d = cfg.tes_efficiencies[1];
  const PoissonSource bg(cfg.background_rate_per_pulse);

  HomRun run;
  run.dip_delay_ps = model.dip_ps;
  std::vector<double> absolute(cfg.hom_delays_ps.size());
  for (std::size_t i = 0; i < absolute.size(); ++i) absolute[i] = model.absolute_delay(cfg, cfg.hom_delays_ps[i]);
  run.single_pair_coincidence = model.coincidence(absolute);

  const std::size_t nd = cfg.hom_delays_ps.size();
  const auto nb = block_count(cfg.n_pulses);
  struct Tally {
    std::uint64_t coinc = 0, sc = 0, sd = 0, one = 0, multi = 0, trunc = 0, coinc_one = 0, coinc_multi = 0;
  };
  // One extra "delay" slot holds the pump-blocked background run.
  std::vector<Tally> tallies((nd + 1) * nb);
  parallel_for((nd + 1) * nb, [&](std::size_t slot) {
    const std::size_t di = slot / nb;
    const std::uint64_t b = slot % nb;
    const std::uint64_t first = b * kPulsesPerBlock;
    const std::uint64_t last = std::min(cfg.n_pulses, first + kPulsesPerBlock);
    const bool background_only = di == nd;
    Rng rng = make_rng(cfg.rng_seed, background_only ? kStreamBackground : kStreamHom, di * nb + b);
    PairSampler local = pairs;
    const double p_ind = background_only ? 0.0 : indistinguishable_fraction(run.single_pair_coincidence[di]);
    Tally& t = tallies[slot];
    for (std::uint64_t p = first; p < last; ++p) {
      const std::uint32_t n = background_only ? 0 : local.draw(rng, nullptr);
      const PortSplit s = hom_split(rng, n, p_ind);
      const std::uint32_t nc = binomial(rng, s.c, eta_c) + bg(rng);
      const std::uint32_t ndd = binomial(rng, s.d, eta_d) + bg(rng);
      const bool coinc = nc > 0 && ndd > 0;
      t.coinc += coinc;
      t.sc += nc > 0;
      t.sd += ndd > 0;
      t.one += n == 1;
      t.multi += n >= 2;
      t.trunc += s.truncated;
      t.coinc_one += coinc && n == 1;
      t.coinc_multi += coinc && n >= 2;
    }
  });

  auto& sc = run.scan;
  sc.delays_ps = cfg.hom_delays_ps;
  for (std::size_t di = 0; di <= nd; ++di) {
    Tally sum;
    for (std::uint64_t b = 0; b < nb; ++b) {
      const Tally& t = tallies[di * nb + b];
      sum.coinc += t.coinc, sum.sc += t.sc, sum.sd += t.sd, sum.one += t.one, sum.multi += t.multi;
      sum.trunc += t.trunc, sum.coinc_one += t.coinc_one, sum.coinc_multi += t.coinc_multi;
    }
    if (di == nd) {
      run.background = {static_cast<double>(cfg.n_pulses), static_cast<double>(sum.coinc), static_cast<double>(sum.sc),
                        static_cast<double>(sum.sd)};
      continue;
    }
    sc.coincidences.push_back(static_cast<double>(sum.coinc));
    sc.pulses.push_back(static_cast<double>(cfg.n_pulses));
    sc.singles_c.push_back(static_cast<double>(sum.sc));
    sc.singles_d.push_back(static_cast<double>(sum.sd));
    run.single_pair_coincidences.push_back(static_cast<double>(sum.coinc_one));
    run.multi_pair_coincidences.push_back(static_cast<double>(sum.coinc_multi));
    run.single_pair_pulses += sum.one;
    run.multi_pair_pulses += sum.multi;
    run.truncated_pulses += sum.trunc;
  }
  return run;
}

std::vector<TesRecord> simulate_tes_run(const RunConfig& cfg, TesGeometry geometry, double delay_ps) {
  cfg.validate();
  PairSampler pairs(cfg);
  double p_ind = 1.0;
  if (geometry == TesGeometry::hom) {
    const HomModel model(cfg);
    p_ind = indistinguishable_fraction(model.coincidence({model.absolute_delay(cfg, delay_ps)})[0]);
  }
  const double eta_c = cfg.tes_efficiencies[0], eta_d = cfg.tes_efficiencies[1];
  const PoissonSource bg(cfg.background_rate_per_pulse);
  std::vector<TesRecord> out(cfg.n_pulses);
  for_blocks(cfg.n_pulses, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
    Rng rng = make_rng(cfg.rng_seed, kStreamTes, b);
    PairSampler local = pairs;
    for (std::uint64_t p = first; p < last; ++p) {
      const std::uint32_t n = local.draw(rng, nullptr);
      std::uint32_t c = n, d = n;
      if (geometry == TesGeometry::hom) {
        const PortSplit s = hom_split(rng, n, p_ind);
        c = s.c;
        d = s.d;
      }
      out[p] = {p, binomial(rng, c, eta_c) + bg(rng), binomial(rng, d, eta_d) + bg(rng)};
    }
  });
  return out;
}

CorrelationRun simulate_correlation_run(const RunConfig& cfg, CorrelationCase which) {
  cfg.validate();
  PairSampler pairs(cfg);
  double p_ind = 1.0;
  if (which == CorrelationCase::auto_cc) {
    const HomModel model(cfg);
    p_ind = indistinguishable_fraction(model.coincidence({model.absolute_delay(cfg, 0.0)})[0]);
  }
  const double period = cfg.clock_period_ps();
  const double lat_a = cfg.path_signal.latency_ps, lat_b = cfg.path_idler.latency_ps;
  const auto& da = cfg.detector_signal;
  const auto& db = cfg.detector_idler;
  const PoissonSource dark_a(da.dark_rate_hz * period * 1e-12);
  const PoissonSource dark_b(db.dark_rate_hz * period * 1e-12);

  const auto nb = block_count(cfg.n_pulses);
  std::vector<std::vector<Draft>> parts(nb);
  for_blocks(cfg.n_pulses, [&](std::uint64_t b, std::uint64_t first, std::uint64_t last) {
    Rng rng = make_rng(cfg.rng_seed, kStreamCorrelation, b);
    PairSampler local = pairs;
    std::normal_distribution<double> ja(0.0, da.jitter_sigma_ps()), jb(0.0, db.jitter_sigma_ps());
    auto& out = parts[b];
    for (std::uint64_t p = first; p < last; ++p) {
      const double t_edge = static_cast<double>(p) * period;
      const std::uint32_t n = local.draw(rng, nullptr);
      std::uint32_t a = 0, c = 0;
      switch (which) {
        case CorrelationCase::cross_hv:
          a = n;
          c = n;
          break;
        case CorrelationCase::auto_hh:
          a = binomial(rng, n, 0.5);
          c = n - a;
          break;
        case CorrelationCase::auto_cc: {
          const std::uint32_t port = hom_split(rng, n, p_ind).c;
          a = binomial(rng, port, 0.5);
          c = port - a;
          break;
        }
      }
      if (binomial(rng, a, da.efficiency) > 0)
        out.push_back({to_ps(t_edge + lat_a + (da.jitter_fwhm_ps > 0 ? ja(rng) : 0.0)), 0, TagOrigin::signal});
      if (binomial(rng, c, db.efficiency) > 0)
        out.push_back({to_ps(t_edge + lat_b + (db.jitter_fwhm_ps > 0 ? jb(rng) : 0.0)), 1, TagOrigin::idler});
      add_darks(rng, out, 0, dark_a, t_edge, period);
      add_darks(rng, out, 1, dark_b, t_edge, period);
    }
  });
  std::vector<Draft> all;
  for (auto& part : parts) all.insert(all.end(), part.begin(), part.end());
  finish_drafts(all, da.deadtime_ns * 1e3, db.deadtime_ns * 1e3);

  CorrelationRun run;
  for (TagStream* s : {&run.start, &run.stop}) {
    s->clock_period_ps = period;
    s->duration_s = static_cast<double>(cfg.n_pulses) / cfg.repetition_rate_hz;
  }
  run.start.channel_names[0] = "start";
  run.stop.channel_names[1] = "stop";
  for (const auto& d : all) (d.channel == 0 ? run.start : run.stop).records.push_back(make_tag(d.channel, d.time, period));
  run.zero_delay_ps = lat_b - lat_a;
  return run;
}

void write_tes_csv(std::ostream& out, const std::vector<TesRecord>& records) {
  CsvWriter w(out);
  w.header({"clock_index", "n_c", "n_d"});
  for (const auto& r : records)
    w.raw_row({format_number(r.clock_index), format_number(static_cast<std::uint64_t>(r.n_c)),
               format_number(static_cast<std::uint64_t>(r.n_d))});
}

}  // namespace sqz
