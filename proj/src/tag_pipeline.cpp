#include "sqz/tag_pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "sqz/errors.hpp"

namespace sqz {

namespace {

// Index of the bin containing x, or −1. Edges are uniform in all our producers but may not be
// in user input, so fall back to a search.
long find_bin(const std::vector<double>& edges, double x) {
  if (x < edges.front() || x >= edges.back()) return -1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return static_cast<long>(it - edges.begin()) - 1;
}

void check_edges(const std::vector<double>& edges) {
  if (edges.size() < 2) throw Error(ErrorKind::argument, "histogram needs at least one bin");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw Error(ErrorKind::argument, "bin edges must be strictly increasing");
}

double baseline_mean(const std::vector<double>& y, std::size_t edge) {
  double s = 0.0;
  for (std::size_t j = 0; j < edge; ++j) s += y[j] + y[y.size() - 1 - j];
  return s / static_cast<double>(2 * edge);
}

}  // namespace

TagRecord make_tag(std::uint16_t channel, std::uint64_t time_ps, double clock_period_ps, std::uint16_t flags) {
  TagRecord r;
  r.channel = channel;
  r.flags = flags;
  r.time_ps = time_ps;
  const double t = static_cast<double>(time_ps);
  auto idx = static_cast<std::uint64_t>(std::floor(t / clock_period_ps));
  double off = t - static_cast<double>(idx) * clock_period_ps;
  if (off < 0.0) {
    --idx;
    off += clock_period_ps;
  } else if (off >= clock_period_ps) {
    ++idx;
    off -= clock_period_ps;
  }
  r.clock_index = idx;
  r.time_offset_ps = off;
  return r;
}

void TagStream::validate() const {
  if (!(clock_period_ps > 0.0) || !std::isfinite(clock_period_ps))
    throw Error(ErrorKind::argument, "clock period must be positive");
  if (!(duration_s >= 0.0)) throw Error(ErrorKind::argument, "run duration must be non-negative");
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].time_ps < records[i - 1].time_ps) throw Error(ErrorKind::argument, "tag stream is not time ordered");
}

TagStream TagStream::channel(std::uint16_t id) const {
  TagStream out;
  out.clock_period_ps = clock_period_ps;
  out.duration_s = duration_s;
  if (auto it = channel_names.find(id); it != channel_names.end()) out.channel_names[id] = it->second;
  for (const auto& r : records)
    if (r.channel == id) out.records.push_back(r);
  return out;
}

std::uint64_t TagStream::n_pulses() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * 1e12 / clock_period_ps));
}

DemuxResult demux_polarization(const TagStream& stream, const DemuxConfig& cfg) {
  stream.validate();
  const double period = stream.clock_period_ps;
  const double w0 = cfg.window_start_ps, w1 = cfg.window_end_ps;
  const double len = w1 - w0;
  if (!(len > 0.0) || w0 < 0.0 || w1 > period) throw Error(ErrorKind::config, "demux window must lie inside one clock period");
  if (!(cfg.idler_delay_ps > 0.0)) throw Error(ErrorKind::config, "idler delay must be positive");
  const double b0 = std::fmod(w0 + cfg.idler_delay_ps, period);
  const double fwd = std::fmod(b0 - w0 + period, period);
  const double back = std::fmod(w0 - b0 + period, period);
  if (fwd < len || back < len) throw Error(ErrorKind::config, "signal and delayed idler windows overlap");

  const auto delay = static_cast<std::uint64_t>(std::llround(cfg.idler_delay_ps));
  DemuxResult out;
  for (TagStream* s : {&out.signal, &out.idler}) {
    s->clock_period_ps = period;
    s->duration_s = stream.duration_s;
  }
  out.signal.channel_names[cfg.signal_channel] = "signal";
  out.idler.channel_names[cfg.idler_channel] = "idler";
  for (const auto& r : stream.records) {
    if (r.channel != cfg.channel) continue;
    if (r.time_offset_ps >= w0 && r.time_offset_ps < w1) {
      out.signal.records.push_back(make_tag(cfg.signal_channel, r.time_ps, period, r.flags));
      continue;
    }
    if (r.time_ps >= delay) {
      const TagRecord shifted = make_tag(cfg.idler_channel, r.time_ps - delay, period, r.flags);
      if (shifted.time_offset_ps >= w0 && shifted.time_offset_ps < w1) {
        out.idler.records.push_back(shifted);
        continue;
      }
    }
    ++out.discarded;
  }
  return out;
}

std::vector<double> uniform_edges(double lo_nm, double hi_nm, std::size_t bins) {
  if (bins == 0 || !(hi_nm > lo_nm)) throw Error(ErrorKind::argument, "invalid bin specification");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    e[i] = lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) / static_cast<double>(bins);
  return e;
}

std::optional<double> tag_wavelength(const TagRecord& tag, const SpectrometerPath& path) {
  const double delay = tag.time_offset_ps - path.latency_ps + path.model.coeffs[0];
  try {
    return delay_to_wavelength(path.model, delay, path.branch);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::unphysical_delay || e.kind() == ErrorKind::range) return std::nullopt;
    throw;
  }
}

SinglesSpectrum singles_spectrum(std::span<const TagRecord> tags, const SpectrometerPath& path,
                                 const std::vector<double>& edges_nm) {
  check_edges(edges_nm);
  SinglesSpectrum out;
  out.edges_nm = edges_nm;
  out.counts.assign(edges_nm.size() - 1, 0);
  for (const auto& t : tags) {
    const auto lam = tag_wavelength(t, path);
    if (!lam) {
      ++out.discarded;
      continue;
    }
    const long b = find_bin(edges_nm, *lam);
    if (b < 0) {
      ++out.alias;
    } else {
      ++out.counts[static_cast<std::size_t>(b)];
      ++out.binned;
    }
  }
  return out;
}

void Histogram2D::validate() const {
  check_edges(edges_signal_nm);
  check_edges(edges_idler_nm);
  if (static_cast<std::size_t>(counts.rows()) + 1 != edges_signal_nm.size() ||
      static_cast<std::size_t>(counts.cols()) + 1 != edges_idler_nm.size())
    throw Error(ErrorKind::grid_mismatch, "histogram counts do not match its edges");
  if ((counts.array() < 0.0).any() || !counts.allFinite())
    throw Error(ErrorKind::argument, "histogram counts must be finite and non-negative");
}

JointSpectrumResult joint_spectrum(const TagStream& signal, const TagStream& idler, const SpectrometerPath& signal_path,
                                   const SpectrometerPath& idler_path, const std::vector<double>& edges_signal_nm,
                                   const std::vector<double>& edges_idler_nm) {
  signal.validate();
  idler.validate();
  check_edges(edges_signal_nm);
  check_edges(edges_idler_nm);
  if (std::abs(signal.clock_period_ps - idler.clock_period_ps) > 1e-9 * signal.clock_period_ps)
    throw Error(ErrorKind::stream_alignment, "signal and idler streams use different clock periods");
  const auto& s = signal.records;
  const auto& i = idler.records;
  if (!s.empty() && !i.empty() &&
      (s.back().clock_index < i.front().clock_index || i.back().clock_index < s.front().clock_index))
    throw Error(ErrorKind::stream_alignment, "signal and idler clock ranges do not overlap");

  JointSpectrumResult out;
  auto& h = out.histogram;
  h.edges_signal_nm = edges_signal_nm;
  h.edges_idler_nm = edges_idler_nm;
  h.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges_signal_nm.size() - 1),
                                   static_cast<Eigen::Index>(edges_idler_nm.size() - 1));
  std::size_t a = 0, b = 0;
  while (a < s.size() && b < i.size()) {
    const auto ca = s[a].clock_index, cb = i[b].clock_index;
    if (ca < cb) {
      ++a;
      continue;
    }
    if (cb < ca) {
      ++b;
      continue;
    }
    std::size_t a_end = a, b_end = b;
    while (a_end < s.size() && s[a_end].clock_index == ca) ++a_end;
    while (b_end < i.size() && i[b_end].clock_index == ca) ++b_end;
    ++out.coincident_pulses;
    if (a_end - a > 1 || b_end - b > 1) ++out.multi_tag_pulses;
    for (std::size_t x = a; x < a_end; ++x) {
      const auto ls = tag_wavelength(s[x], signal_path);
      for (std::size_t y = b; y < b_end; ++y) {
        ++out.pairings;
        const auto li = tag_wavelength(i[y], idler_path);
        const long bs = ls ? find_bin(edges_signal_nm, *ls) : -1;
        const long bi = li ? find_bin(edges_idler_nm, *li) : -1;
        if (bs < 0 || bi < 0) {
          ++out.unbinned_pairings;
          continue;
        }
        h.counts(bs, bi) += 1.0;
      }
    }
    a = a_end;
    b = b_end;
  }
  return out;
}

G2Estimate g2_peak_ratio(std::span<const TagRecord> start, std::span<const TagRecord> stop, double clock_period_ps,
                         unsigned n_side_peaks, double zero_delay_ps) {
  if (n_side_peaks == 0) throw Error(ErrorKind::argument, "g2 needs at least one side peak per side");
  if (!(clock_period_ps > 0.0)) throw Error(ErrorKind::argument, "clock period must be positive");
  const double n = static_cast<double>(n_side_peaks);
  const double reach = (n + 0.5) * clock_period_ps;
  G2Estimate out;
  out.peak_areas.assign(2 * n_side_peaks + 1, 0.0);
  std::size_t lo = 0;
  for (const auto& s : start) {
    const double ts = static_cast<double>(s.time_ps) + zero_delay_ps;
    while (lo < stop.size() && static_cast<double>(stop[lo].time_ps) < ts - reach) ++lo;
    for (std::size_t j = lo; j < stop.size(); ++j) {
      const double d = static_cast<double>(stop[j].time_ps) - ts;
      if (d >= reach) break;
      const long k = std::lround(std::floor(d / clock_period_ps + 0.5));
      out.peak_areas[static_cast<std::size_t>(k + static_cast<long>(n_side_peaks))] += 1.0;
    }
  }
  double side = 0.0;
  for (std::size_t k = 0; k < out.peak_areas.size(); ++k) {
    if (k == n_side_peaks) continue;
    if (out.peak_areas[k] == 0.0) throw Error(ErrorKind::insufficient_statistics, "a side peak is empty");
    side += out.peak_areas[k];
  }
  out.zero_peak = out.peak_areas[n_side_peaks];
  out.side_mean = side / (2.0 * n);
  out.g2 = out.zero_peak / out.side_mean;
  out.sigma = out.zero_peak > 0.0 ? out.g2 * std::sqrt(1.0 / out.zero_peak + 1.0 / side) : 0.0;
  return out;
}

HomAnalysis hom_analysis(const HomScan& scan, const BackgroundRun& bg) {
  const std::size_t n = scan.delays_ps.size();
  if (scan.coincidences.size() != n || scan.pulses.size() != n || scan.singles_c.size() != n || scan.singles_d.size() != n)
    throw Error(ErrorKind::argument, "HOM scan columns differ in length");
  if (n < 5) throw Error(ErrorKind::baseline, "HOM scan too short to contain baseline plateaus");
  if (!(bg.pulses > 0.0)) throw Error(ErrorKind::argument, "background run has no pulses");
  for (double p : scan.pulses)
    if (!(p > 0.0)) throw Error(ErrorKind::argument, "every scan point needs a positive pulse count");

  const double bg_c = bg.singles_c / bg.pulses;
  const double bg_d = bg.singles_d / bg.pulses;
  const double bg_cc = bg.coincidences / bg.pulses;
  const double bg_cc_var = bg.coincidences / (bg.pulses * bg.pulses);

  HomAnalysis out;
  std::vector<double> var_raw(n), var_bg(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double p = scan.pulses[j];
    const double raw = scan.coincidences[j] / p;
    const double r_ph_c = std::max(0.0, scan.singles_c[j] / p - bg_c);
    const double r_ph_d = std::max(0.0, scan.singles_d[j] / p - bg_d);
    const double acc = r_ph_c * bg_d + bg_c * r_ph_d;
    out.raw_curve.push_back(raw);
    out.background_subtracted_curve.push_back(raw - bg_cc);
    out.corrected_curve.push_back(raw - bg_cc - acc);
    out.accidentals.push_back(acc);
    var_raw[j] = scan.coincidences[j] / (p * p);
    var_bg[j] = var_raw[j] + bg_cc_var;
  }

  const std::size_t edge = std::max<std::size_t>(1, n / 5);
  auto visibility = [&](const std::vector<double>& y, const std::vector<double>& var, bool check) {
    const double base = baseline_mean(y, edge);
    double var_base = 0.0;
    for (std::size_t j = 0; j < edge; ++j) var_base += var[j] + var[n - 1 - j];
    var_base /= static_cast<double>(4 * edge * edge);
    if (!(base > 0.0) || (check && !(base > 3.0 * std::sqrt(var_base))))
      throw Error(ErrorKind::baseline, "no coincidence plateau above background");
    const auto it = std::min_element(y.begin(), y.end());
    const double m = *it;
    const double var_m = var[static_cast<std::size_t>(it - y.begin())];
    const double v = 1.0 - m / base;
    const double s2 = var_m / (base * base) + m * m * var_base / (base * base * base * base);
    return Estimate{v, std::sqrt(s2)};
  };
  out.raw = visibility(out.raw_curve, var_raw, false);
  out.background_subtracted = visibility(out.background_subtracted_curve, var_bg, true);
  out.accidental_corrected = visibility(out.corrected_curve, var_bg, true);
  return out;
}

CountSummary count_summary(const TagStream& a, const TagStream& b, const TagStream* background_a,
                           const TagStream* background_b) {
  a.validate();
  b.validate();
  if (!(a.duration_s > 0.0)) throw Error(ErrorKind::argument, "run duration must be positive");
  if (std::abs(a.duration_s - b.duration_s) > 1e-12 * a.duration_s)
    throw Error(ErrorKind::argument, "streams cover different durations");
  auto rate = [](double count, double t) { return Estimate{count / t, std::sqrt(count) / t}; };
  auto count_channels = [&](const TagStream& s, CountSummary& out) {
    std::map<std::uint16_t, double> n;
    for (const auto& r : s.records) n[r.channel] += 1.0;
    for (auto& [ch, c] : n) out.singles_hz[ch] = rate(c, s.duration_s);
  };
  auto coincident_pulses = [](const TagStream& x, const TagStream& y) {
    double c = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.records.size() && j < y.records.size()) {
      const auto ci = x.records[i].clock_index, cj = y.records[j].clock_index;
      if (ci < cj) {
        ++i;
      } else if (cj < ci) {
        ++j;
      } else {
        c += 1.0;
        while (i < x.records.size() && x.records[i].clock_index == ci) ++i;
        while (j < y.records.size() && y.records[j].clock_index == ci) ++j;
      }
    }
    return c;
  };

  CountSummary out;
  out.duration_s = a.duration_s;
  count_channels(a, out);
  count_channels(b, out);
  out.coincidence_hz = rate(coincident_pulses(a, b), a.duration_s);

  const double pulses = static_cast<double>(a.n_pulses());
  if (pulses > 0.0) {
    const double na = static_cast<double>(a.records.size()), nb = static_cast<double>(b.records.size());
    const double acc = na * nb / pulses;  // expected chance coincidences over the run
    const double v = acc * acc * (1.0 / std::max(na, 1.0) + 1.0 / std::max(nb, 1.0));
    out.accidental_hz = {acc / a.duration_s, std::sqrt(v) / a.duration_s};
  }
  if (background_a && background_b) {
    background_a->validate();
    background_b->validate();
    if (!(background_a->duration_s > 0.0)) throw Error(ErrorKind::argument, "background duration must be positive");
    out.background_coincidence_hz = rate(coincident_pulses(*background_a, *background_b), background_a->duration_s);
  }
  return out;
}

}  // namespace sqz
