#include "sqz/cli/config_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sqz/csv.hpp"
#include "sqz/errors.hpp"
#include "sqz/units.hpp"

namespace sqz::cli {

namespace {

namespace pt = boost::property_tree;

const char* dimension_name(Dimension d) {
  switch (d) {
    case Dimension::length: return "a length (m, mm, um, nm)";
    case Dimension::frequency: return "a frequency (Hz ... THz)";
    case Dimension::time: return "a time (s ... fs)";
    case Dimension::rate: return "a rate (Hz, /s)";
    case Dimension::dimensionless: return "a plain number";
  }
  return "a value";
}

// Typed access to one INI tree. Every lookup is recorded so leftovers can be reported and the
// resolved value echoed into the manifest.
class Reader {
 public:
  Reader(const pt::ptree& tree, std::vector<std::pair<std::string, std::string>>& echo) : tree_(tree), echo_(echo) {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty())
        throw Error(ErrorKind::config, "key '" + section + "' must be inside a [section]");
      for (const auto& kv : body) present_.insert(section + "." + kv.first);
    }
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    const std::string name = section + "." + key;
    used_.insert(name);
    const auto sec = tree_.find(section);
    if (sec == tree_.not_found()) return std::nullopt;
    const auto it = sec->second.find(key);
    if (it == sec->second.not_found()) return std::nullopt;
    return it->second.data();
  }

  double quantity(const std::string& section, const std::string& key, double fallback, Dimension dim) {
    const auto text = raw(section, key);
    double v = fallback;
    if (text) {
      const Quantity q = parse(section, key, *text);
      const bool ok = q.dimension == dim || (dim == Dimension::rate && q.dimension == Dimension::frequency);
      if (!ok) fail(section, key, "expected " + std::string(dimension_name(dim)) + ", got '" + *text + "'");
      v = q.value;
    }
    if (!std::isfinite(v)) fail(section, key, "value must be finite");
    record(section, key, format_number(v));
    return v;
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    return quantity(section, key, fallback, Dimension::dimensionless);
  }

  std::uint64_t integer(const std::string& section, const std::string& key, std::uint64_t fallback) {
    const auto text = raw(section, key);
    std::uint64_t v = fallback;
    if (text) {
      const std::string& s = *text;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size())
        fail(section, key, "expected a non-negative integer, got '" + s + "'");
    }
    record(section, key, format_number(v));
    return v;
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) {
    const auto text = raw(section, key);
    bool v = fallback;
    if (text) {
      if (*text == "true" || *text == "yes" || *text == "1") {
        v = true;
      } else if (*text == "false" || *text == "no" || *text == "0") {
        v = false;
      } else {
        fail(section, key, "expected true or false, got '" + *text + "'");
      }
    }
    record(section, key, v ? "true" : "false");
    return v;
  }

  template <typename E>
  E choice(const std::string& section, const std::string& key, E fallback, const std::map<std::string, E>& options) {
    const auto text = raw(section, key);
    E v = fallback;
    if (text) {
      const auto it = options.find(*text);
      if (it == options.end()) {
        std::string names;
        for (const auto& [n, e] : options) names += (names.empty() ? "" : ", ") + n;
        fail(section, key, "expected one of {" + names + "}, got '" + *text + "'");
      }
      v = it->second;
    }
    for (const auto& [n, e] : options)
      if (e == v) record(section, key, n);
    return v;
  }

  std::optional<std::string> text(const std::string& section, const std::string& key) {
    auto t = raw(section, key);
    if (t) record(section, key, *t);
    return t;
  }

  void note(const std::string& section, const std::string& key, std::string value) {
    record(section, key, std::move(value));
  }

  void reject_unknown() const {
    for (const auto& name : present_)
      if (!used_.count(name)) throw Error(ErrorKind::config, "unknown key '" + name + "'");
  }

  [[noreturn]] static void fail(const std::string& section, const std::string& key, const std::string& what) {
    throw Error(ErrorKind::config, "key '" + section + "." + key + "': " + what);
  }

 private:
  static Quantity parse(const std::string& section, const std::string& key, const std::string& text) {
    try {
      return parse_quantity(text);
    } catch (const Error& e) {
      fail(section, key, e.message());
    }
  }

  void record(const std::string& section, const std::string& key, std::string value) {
    echo_.emplace_back(section + "." + key, std::move(value));
  }

  const pt::ptree& tree_;
  std::vector<std::pair<std::string, std::string>>& echo_;
  std::set<std::string> present_;
  std::set<std::string> used_;
};

std::filesystem::path relative_to(const std::filesystem::path& origin, const std::string& file) {
  const std::filesystem::path p(file);
  if (p.is_absolute() || origin.empty()) return p;
  return origin.parent_path() / p;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SpectralFilter read_filter(Reader& r, const std::string& section, const std::filesystem::path& origin) {
  using Shape = SpectralFilter::Shape;
  enum class Kind { all_pass, top_hat, gaussian, tabulated };
  const Kind kind = r.choice<Kind>(section, "shape", Kind::all_pass,
                                   {{"all_pass", Kind::all_pass},
                                    {"top_hat", Kind::top_hat},
                                    {"gaussian", Kind::gaussian},
                                    {"tabulated", Kind::tabulated}});
  if (kind == Kind::all_pass) return SpectralFilter::all_pass();
  SpectralFilter f;
  f.center_wavelength = r.quantity(section, "center", 1570e-9, Dimension::length);
  if (kind == Kind::tabulated) {
    f.shape = Shape::tabulated;
    const auto file = r.text(section, "table");
    if (!file) Reader::fail(section, "table", "a tabulated filter needs a CSV file of wavelength_nm,transmission");
    std::istringstream in(read_text(relative_to(origin, *file)));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != 2) Reader::fail(section, "table", "rows must have two columns");
      try {
        f.table.emplace_back(std::stod(cells[0]) * 1e-9, std::stod(cells[1]));
      } catch (const std::exception&) {
        if (f.table.empty()) continue;  // header row
        Reader::fail(section, "table", "row '" + line + "' is not numeric");
      }
    }
  } else {
    // Width may be given as a wavelength span or as an optical frequency span.
    const auto text = r.raw(section, "width");
    double width = 8.6e-9;
    if (text) {
      Quantity q;
      try {
        q = parse_quantity(*text);
      } catch (const Error& e) {
        Reader::fail(section, "width", e.message());
      }
      if (q.dimension == Dimension::length) {
        width = q.value;
      } else if (q.dimension == Dimension::frequency) {
        width = q.value * f.center_wavelength * f.center_wavelength / kSpeedOfLight;
      } else {
        Reader::fail(section, "width", "expected a length or a frequency, got '" + *text + "'");
      }
    }
    f.shape = kind == Kind::top_hat ? Shape::top_hat : Shape::gaussian;
    f.bandwidth = width;
    r.note(section, "width", format_number(width));
  }
  try {
    f.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, "section [" + section + "]: " + e.message());
  }
  return f;
}

DetectorModel read_detector(Reader& r, const std::string& section) {
  DetectorModel d;
  d.jitter_fwhm_ps = r.quantity(section, "jitter_fwhm", 65e-12, Dimension::time) * 1e12;
  d.dark_rate_hz = r.quantity(section, "dark_rate", 1000.0, Dimension::rate);
  d.efficiency = r.number(section, "efficiency", 1.0);
  d.deadtime_ns = r.quantity(section, "deadtime", 70e-9, Dimension::time) * 1e9;
  if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0)) Reader::fail(section, "efficiency", "must be in [0, 1]");
  if (d.jitter_fwhm_ps < 0.0) Reader::fail(section, "jitter_fwhm", "must be non-negative");
  if (d.dark_rate_hz < 0.0) Reader::fail(section, "dark_rate", "must be non-negative");
  if (d.deadtime_ns < 0.0) Reader::fail(section, "deadtime", "must be non-negative");
  return d;
}

DispersionModel read_dispersion(Reader& r, const std::string& key, DispersionModel fallback,
                                const std::filesystem::path& origin) {
  const auto file = r.text("spectrometer", key);
  if (!file) return fallback;
  try {
    return dispersion_from_key_value(read_text(relative_to(origin, *file)));
  } catch (const Error& e) {
    Reader::fail("spectrometer", key, e.message());
  }
}

}  // namespace

std::string to_string(RunKind kind) {
  switch (kind) {
    case RunKind::tags: return "tags";
    case RunKind::hom: return "hom";
    case RunKind::tes: return "tes";
    case RunKind::correlation: return "correlation";
  }
  return "unknown";
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& origin) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::config, "line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentConfig cfg;
  cfg.path = origin;
  cfg.text = text;
  Reader r(tree, cfg.echo);

  auto& s = cfg.source;
  s.pump_center_wavelength = r.quantity("source", "pump_center_wavelength", s.pump_center_wavelength, Dimension::length);
  s.pump_fwhm_bandwidth = r.quantity("source", "pump_fwhm_bandwidth", s.pump_fwhm_bandwidth, Dimension::length);
  s.crystal_length = r.quantity("source", "crystal_length", s.crystal_length, Dimension::length);
  s.poling_period = r.quantity("source", "poling_period", s.poling_period, Dimension::length);
  s.group_index_pump = r.number("source", "group_index_pump", s.group_index_pump);
  s.group_index_signal = r.number("source", "group_index_signal", s.group_index_signal);
  s.group_index_idler = r.number("source", "group_index_idler", s.group_index_idler);
  s.signal_center_offset = r.quantity("source", "signal_center_offset", s.signal_center_offset, Dimension::length);
  s.pump_chirp = r.number("source", "pump_chirp_fs2", s.pump_chirp * 1e30) * 1e-30;
  s.pump_waist = r.quantity("source", "pump_waist", s.pump_waist, Dimension::length);
  s.confocal_parameter = r.quantity("source", "confocal_parameter", s.confocal_parameter, Dimension::length);
  cfg.kernel = r.choice<KernelModel>("source", "kernel", KernelModel::physical,
                                     {{"physical", KernelModel::physical}, {"separable", KernelModel::separable}});
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, std::string("section [source]: ") + e.message());
  }

  cfg.grid_points = r.integer("grid", "points", cfg.grid_points);
  cfg.grid_span_sigma = r.number("grid", "span_sigma", cfg.grid_span_sigma);
  if (cfg.grid_points < 8 || cfg.grid_points > 4096) Reader::fail("grid", "points", "must be in [8, 4096]");
  if (!(cfg.grid_span_sigma > 0.0)) Reader::fail("grid", "span_sigma", "must be positive");

  auto& run = cfg.run;
  run.filter_signal = read_filter(r, "filter_signal", origin);
  run.filter_idler = read_filter(r, "filter_idler", origin);

  run.source.mean_total_photons = r.number("photons", "mean_photons", run.source.mean_total_photons);
  if (!(run.source.mean_total_photons >= 0.0)) Reader::fail("photons", "mean_photons", "must be non-negative");
  run.statistics = r.choice<PairStatistics>(
      "photons", "statistics", PairStatistics::thermal,
      {{"thermal", PairStatistics::thermal}, {"single_pair", PairStatistics::single_pair}});
  cfg.weights = r.choice<ModeWeights>(
      "photons", "modes", ModeWeights::filtered,
      {{"filtered", ModeWeights::filtered}, {"unfiltered", ModeWeights::unfiltered}, {"single", ModeWeights::single}});

  cfg.kind = r.choice<RunKind>(
      "run", "kind", RunKind::tags,
      {{"tags", RunKind::tags}, {"hom", RunKind::hom}, {"tes", RunKind::tes}, {"correlation", RunKind::correlation}});
  run.repetition_rate_hz = r.quantity("run", "repetition_rate", run.repetition_rate_hz, Dimension::frequency);
  if (!(run.repetition_rate_hz > 0.0)) Reader::fail("run", "repetition_rate", "must be positive");
  run.n_pulses = r.integer("run", "pulses", run.n_pulses);
  if (run.n_pulses == 0) Reader::fail("run", "pulses", "must be positive");
  const bool has_seed = r.raw("run", "seed").has_value();
  run.rng_seed = r.integer("run", "seed", 0);
  run.background_rate_per_pulse = r.number("run", "background_per_pulse", run.background_rate_per_pulse);
  if (!(run.background_rate_per_pulse >= 0.0)) Reader::fail("run", "background_per_pulse", "must be non-negative");
  run.tes_efficiencies[0] = r.number("run", "tes_efficiency_c", run.tes_efficiencies[0]);
  run.tes_efficiencies[1] = r.number("run", "tes_efficiency_d", run.tes_efficiencies[1]);
  if (!(run.tes_efficiencies[0] >= 0.0 && run.tes_efficiencies[0] <= 1.0))
    Reader::fail("run", "tes_efficiency_c", "must be in [0, 1]");
  if (!(run.tes_efficiencies[1] >= 0.0 && run.tes_efficiencies[1] <= 1.0))
    Reader::fail("run", "tes_efficiency_d", "must be in [0, 1]");
  run.time_multiplexed = r.boolean("run", "time_multiplexed", run.time_multiplexed);
  run.idler_delay_ps = r.quantity("run", "idler_delay", run.idler_delay_ps * 1e-12, Dimension::time) * 1e12;
  if (!(run.idler_delay_ps >= 0.0)) Reader::fail("run", "idler_delay", "must be non-negative");
  cfg.correlation = r.choice<CorrelationCase>("run", "correlation", CorrelationCase::cross_hv,
                                              {{"cross_hv", CorrelationCase::cross_hv},
                                               {"auto_hh", CorrelationCase::auto_hh},
                                               {"auto_cc", CorrelationCase::auto_cc}});
  cfg.tes_geometry = r.choice<TesGeometry>("run", "tes_geometry", TesGeometry::direct,
                                           {{"direct", TesGeometry::direct}, {"hom", TesGeometry::hom}});
  cfg.tes_delay_ps = r.quantity("run", "tes_delay", 0.0, Dimension::time) * 1e12;

  cfg.hom_start_ps = r.quantity("hom", "delay_start", cfg.hom_start_ps * 1e-12, Dimension::time) * 1e12;
  cfg.hom_stop_ps = r.quantity("hom", "delay_stop", cfg.hom_stop_ps * 1e-12, Dimension::time) * 1e12;
  cfg.hom_step_ps = r.quantity("hom", "delay_step", cfg.hom_step_ps * 1e-12, Dimension::time) * 1e12;
  run.hom_delays_relative_to_dip = r.boolean("hom", "relative_to_dip", run.hom_delays_relative_to_dip);
  if (!(cfg.hom_step_ps > 0.0)) Reader::fail("hom", "delay_step", "must be positive");
  if (!(cfg.hom_stop_ps > cfg.hom_start_ps)) Reader::fail("hom", "delay_stop", "must exceed delay_start");

  run.detector_signal = read_detector(r, "detector_signal");
  run.detector_idler = read_detector(r, "detector_idler");

  run.path_signal.model = read_dispersion(r, "dispersion_signal", signal_path_model(), origin);
  run.path_idler.model = read_dispersion(r, "dispersion_idler", idler_path_model(), origin);
  run.path_signal.latency_ps = r.quantity("spectrometer", "latency_signal", 2e-9, Dimension::time) * 1e12;
  run.path_idler.latency_ps = r.quantity("spectrometer", "latency_idler", 2e-9, Dimension::time) * 1e12;
  const Branch branch = r.choice<Branch>("spectrometer", "branch", Branch::above_fold,
                                         {{"above_fold", Branch::above_fold}, {"below_fold", Branch::below_fold}});
  run.path_signal.branch = run.path_idler.branch = branch;
  const double period_ps = run.clock_period_ps();
  for (const auto* p : {&run.path_signal, &run.path_idler})
    if (!(p->latency_ps >= 0.0 && p->latency_ps < period_ps))
      Reader::fail("spectrometer", p == &run.path_signal ? "latency_signal" : "latency_idler",
                   "must lie within one clock period");

  auto& a = cfg.analysis;
  a.bin_min_nm = r.quantity("analysis", "bin_min", a.bin_min_nm * 1e-9, Dimension::length) * 1e9;
  a.bin_max_nm = r.quantity("analysis", "bin_max", a.bin_max_nm * 1e-9, Dimension::length) * 1e9;
  a.bins = r.integer("analysis", "bins", a.bins);
  if (!(a.bin_max_nm > a.bin_min_nm)) Reader::fail("analysis", "bin_max", "must exceed bin_min");
  if (a.bins == 0) Reader::fail("analysis", "bins", "must be positive");
  const bool has_window = r.raw("analysis", "window_start").has_value() || r.raw("analysis", "window_end").has_value();
  a.window_start_ps = r.quantity("analysis", "window_start", 0.0, Dimension::time) * 1e12;
  a.window_end_ps = r.quantity("analysis", "window_end", 0.0, Dimension::time) * 1e12;
  a.window_auto = !has_window;
  if (has_window && !(a.window_end_ps > a.window_start_ps))
    Reader::fail("analysis", "window_end", "must exceed window_start");
  a.side_peaks = static_cast<unsigned>(r.integer("analysis", "side_peaks", a.side_peaks));
  if (a.side_peaks == 0 || a.side_peaks > 1000) Reader::fail("analysis", "side_peaks", "must be in [1, 1000]");

  r.reject_unknown();
  if (!has_seed) Reader::fail("run", "seed", "is required (no ambient entropy)");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path), path);
}

JointSpectralAmplitude build_source_jsa(const ExperimentConfig& cfg) {
  const FrequencyGrid grid = default_grid(cfg.source, cfg.grid_points, cfg.grid_span_sigma);
  if (cfg.kernel == KernelModel::physical) return build_jsa(cfg.source, grid);
  // Gaussian product centred on the phase-matched point, one pump width per axis.
  const auto [ws, wi] = cfg.source.center_omegas();
  const double sigma = cfg.source.pump_sigma();
  ComplexMatrix m(static_cast<Eigen::Index>(grid.n_signal), static_cast<Eigen::Index>(grid.n_idler));
  for (std::size_t j = 0; j < grid.n_signal; ++j) {
    const double x = (grid.signal_at(j) - ws) / sigma;
    for (std::size_t k = 0; k < grid.n_idler; ++k) {
      const double y = (grid.idler_at(k) - wi) / sigma;
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = std::exp(-0.25 * (x * x + y * y));
    }
  }
  return make_jsa(grid, std::move(m));
}

RunConfig resolve_run(const ExperimentConfig& cfg, const JointSpectralAmplitude& jsa) {
  RunConfig run = cfg.run;
  run.jsa = jsa;
  switch (cfg.weights) {
    case ModeWeights::single:
      run.source.schmidt_weights = {1.0};
      break;
    case ModeWeights::unfiltered:
      run.source.schmidt_weights = schmidt_decompose(jsa).weights;
      break;
    case ModeWeights::filtered:
      run.source.schmidt_weights = schmidt_decompose(apply_filter(jsa, run.filter_signal, run.filter_idler).jsa).weights;
      break;
  }
  run.hom_delays_ps.clear();
  const auto n = static_cast<long>(std::floor((cfg.hom_stop_ps - cfg.hom_start_ps) / cfg.hom_step_ps + 1e-9));
  for (long i = 0; i <= n; ++i) run.hom_delays_ps.push_back(cfg.hom_start_ps + static_cast<double>(i) * cfg.hom_step_ps);
  return run;
}

std::pair<double, double> demux_window(const ExperimentConfig& cfg) {
  if (!cfg.analysis.window_auto) return {cfg.analysis.window_start_ps, cfg.analysis.window_end_ps};
  const auto& f = cfg.run.filter_signal;
  const auto& path = cfg.run.path_signal;
  double lo = path.model.range_min_nm, hi = path.model.range_max_nm;
  if (!f.is_all_pass() && f.shape != SpectralFilter::Shape::tabulated) {
    const double half = (f.shape == SpectralFilter::Shape::gaussian ? 2.0 : 0.5) * f.bandwidth * 1e9;
    lo = std::max(lo, f.center_wavelength * 1e9 - half);
    hi = std::min(hi, f.center_wavelength * 1e9 + half);
  }
  // Delay extent over [lo, hi]: endpoints, plus the fold if it lies inside.
  double t_min = std::min(path.model.delay(lo), path.model.delay(hi));
  double t_max = std::max(path.model.delay(lo), path.model.delay(hi));
  if (path.model.zero_dispersion_nm > lo && path.model.zero_dispersion_nm < hi) t_min = path.model.min_delay();
  const double margin = 5.0 * cfg.run.detector_signal.jitter_sigma_ps();
  const double c0 = path.model.coeffs[0];
  const double start = std::max(0.0, path.latency_ps + t_min - c0 - margin);
  const double end = std::min(cfg.run.clock_period_ps(), path.latency_ps + t_max - c0 + margin);
  return {start, end};
}

}  // namespace sqz::cli
