#include "sqz/cli/commands.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"
#include "sqz/cli/config_file.hpp"
#include "sqz/csv.hpp"
#include "sqz/errors.hpp"
#include "sqz/jsa_model.hpp"
#include "sqz/montecarlo.hpp"
#include "sqz/parallel.hpp"
#include "sqz/photon_stats.hpp"
#include "sqz/tag_io.hpp"
#include "sqz/tag_pipeline.hpp"
#include "sqz/tof_spectrometer.hpp"
#include "sqz/units.hpp"

namespace sqz::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

void prepare_dir(const fs::path& dir) {
  if (dir.empty()) throw Error(ErrorKind::argument, "an output directory (--out) is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct Input {
  std::string role;
  std::string content;
};

// Written before any result. The input hash covers every input file and the invocation
// parameters, so two manifests with the same hash describe byte-identical data outputs.
void write_manifest(const fs::path& dir, const std::string& command, const std::vector<Input>& inputs,
                    const fs::path& config_path, const ExperimentConfig* cfg, std::optional<std::uint64_t> seed) {
  Json files = Json::object();
  std::string tree;
  for (const auto& in : inputs) {
    const std::string h = git_blob_hash(in.content);
    files[in.role] = h;
    tree += h + " " + in.role + "\n";
  }
  Json m;
  m["command"] = command;
  m["config_path"] = config_path.empty() ? Json(nullptr) : Json(config_path.string());
  m["output_directory"] = dir.string();
  m["seed"] = seed ? Json(*seed) : Json(nullptr);
  m["input_hash"] = git_blob_hash(tree);
  m["inputs"] = files;
  Json params = Json::object();
  if (cfg)
    for (const auto& [k, v] : cfg->echo) params[k] = v;
  m["parameters"] = params;
  m["created_utc"] = utc_now();
  write_json(dir / "manifest.json", m);
}

std::string invocation(const std::string& command, const CommandOptions& opt, std::optional<std::uint64_t> seed) {
  std::ostringstream s;
  s << "command=" << command << "\n";
  s << "seed=" << (seed ? std::to_string(*seed) : "none") << "\n";
  if (command == "analyze") s << "mode=" << opt.mode << "\nresamples=" << opt.resamples << "\n";
  if (command == "theory")
    s << "mean_min=" << format_number(opt.mean_min) << "\nmean_max=" << format_number(opt.mean_max)
      << "\npoints=" << opt.points << "\n";
  return s.str();
}

void apply_threads(const CommandOptions& opt) { set_thread_count(opt.threads); }

std::vector<double> wavelengths_nm(const std::vector<double>& omegas) {
  std::vector<double> out(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) out[i] = omega_to_wavelength(omegas[i]) * 1e9;
  return out;
}

std::vector<double> axis(double lo, double step, std::size_t n) {
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = lo + static_cast<double>(i) * step;
  return a;
}

// Matrix CSV: first row holds the idler axis, first column the signal axis.
template <typename Fn>
void write_matrix(const fs::path& path, const std::string& what, const std::vector<double>& rows_nm,
                  const std::vector<double>& cols_nm, Fn&& value) {
  auto out = open_out(path);
  CsvWriter w(out);
  w.comment(what);
  w.comment("rows: signal wavelength (nm); columns: idler wavelength (nm)");
  std::vector<std::string> head{"signal_nm\\idler_nm"};
  for (double c : cols_nm) head.push_back(format_number(c));
  w.raw_row(head);
  for (std::size_t j = 0; j < rows_nm.size(); ++j) {
    std::vector<std::string> row{format_number(rows_nm[j])};
    for (std::size_t k = 0; k < cols_nm.size(); ++k) row.push_back(format_number(value(j, k)));
    w.raw_row(row);
  }
}

void write_modes(const fs::path& path, const ComplexMatrix& modes, const std::vector<double>& omegas,
                 std::size_t count) {
  auto out = open_out(path);
  CsvWriter w(out);
  w.comment("Schmidt mode functions, normalised so that sum |f|^2 * step(rad/s) = 1");
  std::vector<std::string> head{"omega_rad_s", "wavelength_nm"};
  for (std::size_t n = 1; n <= count; ++n) {
    head.push_back("re_" + std::to_string(n));
    head.push_back("im_" + std::to_string(n));
  }
  w.raw_row(head);
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    std::vector<double> row{omegas[i], omega_to_wavelength(omegas[i]) * 1e9};
    for (std::size_t n = 0; n < count; ++n) {
      const auto v = modes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n));
      row.push_back(v.real());
      row.push_back(v.imag());
    }
    w.row(row);
  }
}

void write_marginals(const fs::path& path, const Spectrum& s, const Spectrum& i) {
  auto out = open_out(path);
  CsvWriter w(out);
  w.comment("marginal spectral densities per rad/s, each integrating to 1");
  w.header({"omega_signal_rad_s", "wavelength_signal_nm", "density_signal", "omega_idler_rad_s", "wavelength_idler_nm",
            "density_idler"});
  for (std::size_t k = 0; k < s.axis.size(); ++k)
    w.row({s.axis[k], omega_to_wavelength(s.axis[k]) * 1e9, s.density[k], i.axis[k],
           omega_to_wavelength(i.axis[k]) * 1e9, i.density[k]});
}

Json spectrum_summary(const JointSpectralAmplitude& jsa) {
  const auto [s, i] = marginal_spectra(jsa.intensity(), jsa.grid);
  Json j;
  j["signal_peak_nm"] = spectrum_peak_wavelength(s) * 1e9;
  j["idler_peak_nm"] = spectrum_peak_wavelength(i) * 1e9;
  j["signal_fwhm_nm"] = spectrum_fwhm_wavelength(s) * 1e9;
  j["idler_fwhm_nm"] = spectrum_fwhm_wavelength(i) * 1e9;
  j["overlap_integral"] = jsa.grid.symmetric() ? Json(overlap_integral(s, i)) : Json(nullptr);
  return j;
}

Json decomposition_summary(const SchmidtDecomposition& dec, const JointSpectralAmplitude& jsa) {
  Json j;
  j["K"] = effective_mode_number(dec);
  j["K_abs"] = k_abs(jsa);
  Json w = Json::array();
  for (std::size_t n = 0; n < std::min<std::size_t>(dec.weights.size(), 8); ++n) w.push_back(dec.weights[n]);
  j["leading_weights"] = w;
  return j;
}

std::vector<double> hom_delays(double center_ps) {
  std::vector<double> d;
  for (int k = -200; k <= 200; ++k) d.push_back((center_ps + 0.05 * k) * 1e-12);
  return d;
}

Json hom_model_summary(const JointSpectralAmplitude& jsa, const fs::path& csv) {
  const double dip = hom_dip_delay(jsa, -20e-12, 20e-12);
  const auto delays = hom_delays(dip * 1e12);
  const HomCurve curve = hom_curve(jsa, delays);
  auto out = open_out(csv);
  CsvWriter w(out);
  w.comment("single-pair HOM coincidence probability");
  w.header({"delay_ps", "coincidence_probability"});
  for (std::size_t k = 0; k < delays.size(); ++k) w.row({delays[k] * 1e12, curve.coincidence_probability[k]});
  Json j;
  j["dip_delay_ps"] = dip * 1e12;
  j["visibility"] = curve.visibility();
  return j;
}

// CSV table with a header row; '#' lines skipped. Returns rows of numbers.
std::vector<std::vector<double>> read_table(const fs::path& path, std::size_t columns) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    try {
      for (const auto& c : cells) {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      }
    } catch (const std::exception&) {
      if (header) {
        header = false;
        continue;
      }
      throw Error(ErrorKind::io, path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    header = false;
    if (row.size() < columns)
      throw Error(ErrorKind::io, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(columns) + " columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_singles(const fs::path& path, const SinglesSpectrum& s, const std::string& what) {
  auto out = open_out(path);
  CsvWriter w(out);
  w.comment(what);
  w.comment("alias = inverted but outside the bins; discarded = delay not invertible on the branch");
  w.comment("binned=" + format_number(s.binned) + " alias=" + format_number(s.alias) +
            " discarded=" + format_number(s.discarded));
  w.header({"bin_low_nm", "bin_high_nm", "counts"});
  for (std::size_t b = 0; b < s.counts.size(); ++b)
    w.row({s.edges_nm[b], s.edges_nm[b + 1], static_cast<double>(s.counts[b])});
}

Json estimate_json(const Estimate& e) { return Json{{"value", e.value}, {"sigma", e.sigma}}; }

struct RunFiles {
  fs::path dir;
  Json info;
  ExperimentConfig cfg;
  fs::path config_path;
};

RunFiles open_run(const CommandOptions& opt) {
  if (opt.input.empty()) throw Error(ErrorKind::argument, "analyze needs a run directory");
  RunFiles r;
  r.dir = opt.input;
  r.config_path = opt.config.empty() ? r.dir / "config.ini" : opt.config;
  r.cfg = load_config(r.config_path);
  try {
    r.info = Json::parse(read_file(r.dir / "run.json"));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::io, "run.json: " + std::string(e.what()));
  }
  return r;
}

std::string require_kind(const RunFiles& r, std::initializer_list<RunKind> kinds, const std::string& mode) {
  const std::string kind = r.info.value("kind", "");
  for (RunKind k : kinds)
    if (kind == to_string(k)) return kind;
  throw Error(ErrorKind::argument, "mode '" + mode + "' cannot analyze a '" + kind + "' run");
}

// Splits a run's tag stream into signal and idler streams.
std::pair<TagStream, TagStream> split_streams(const RunFiles& r, std::uint64_t* discarded) {
  const TagStream all = read_tag_stream(r.dir / "tags.bin");
  if (!r.cfg.run.time_multiplexed) {
    *discarded = 0;
    return {all.channel(0), all.channel(1)};
  }
  DemuxConfig d;
  std::tie(d.window_start_ps, d.window_end_ps) = demux_window(r.cfg);
  d.idler_delay_ps = r.cfg.run.idler_delay_ps;
  DemuxResult res = demux_polarization(all, d);
  *discarded = res.discarded;
  return {std::move(res.signal), std::move(res.idler)};
}

void analyze_joint(const CommandOptions& opt, const RunFiles& r, const fs::path& out, std::uint64_t seed) {
  require_kind(r, {RunKind::tags}, "joint");
  std::uint64_t discarded = 0;
  const auto [signal, idler] = split_streams(r, &discarded);
  const auto& a = r.cfg.analysis;
  const auto edges = uniform_edges(a.bin_min_nm, a.bin_max_nm, a.bins);
  const auto js = joint_spectrum(signal, idler, r.cfg.run.path_signal, r.cfg.run.path_idler, edges, edges);
  const auto boot = bootstrap_kabs(js.histogram, opt.resamples, seed);

  std::vector<double> centers(a.bins);
  for (std::size_t b = 0; b < a.bins; ++b) centers[b] = 0.5 * (edges[b] + edges[b + 1]);
  write_matrix(out / "joint_histogram.csv", "coincidence counts per (signal, idler) wavelength bin; bin centres",
               centers, centers, [&](std::size_t j, std::size_t k) {
                 return js.histogram.counts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
               });
  write_singles(out / "singles_signal.csv", singles_spectrum(signal.records, r.cfg.run.path_signal, edges),
                "signal singles spectrum");
  write_singles(out / "singles_idler.csv", singles_spectrum(idler.records, r.cfg.run.path_idler, edges),
                "idler singles spectrum");
  {
    auto f = open_out(out / "bootstrap_samples.csv");
    CsvWriter w(f);
    w.header({"resample", "k_abs"});
    for (std::size_t i = 0; i < boot.samples.size(); ++i) w.row({static_cast<double>(i), boot.samples[i]});
  }
  Json s;
  s["mode"] = "joint";
  s["k_abs"] = boot.estimate;
  s["k_abs_sigma"] = boot.sigma;
  s["bootstrap_resamples"] = boot.resamples;
  s["bootstrap_median"] = boot.median;
  s["bootstrap_bias"] = boot.bias;
  s["ci95_percentile"] = {boot.lower, boot.upper};
  s["ci95_basic"] = {boot.basic_lower, boot.basic_upper};
  s["coincident_pulses"] = js.coincident_pulses;
  s["multi_tag_pulses"] = js.multi_tag_pulses;
  s["pairings"] = js.pairings;
  s["unbinned_pairings"] = js.unbinned_pairings;
  s["histogram_total"] = js.histogram.total();
  s["demux_discarded"] = discarded;
  s["signal_tags"] = signal.records.size();
  s["idler_tags"] = idler.records.size();
  write_json(out / "summary.json", s);
}

void analyze_singles(const RunFiles& r, const fs::path& out) {
  require_kind(r, {RunKind::tags}, "singles");
  std::uint64_t discarded = 0;
  const auto [signal, idler] = split_streams(r, &discarded);
  const auto& a = r.cfg.analysis;
  const auto edges = uniform_edges(a.bin_min_nm, a.bin_max_nm, a.bins);
  const auto ss = singles_spectrum(signal.records, r.cfg.run.path_signal, edges);
  const auto si = singles_spectrum(idler.records, r.cfg.run.path_idler, edges);
  write_singles(out / "singles_signal.csv", ss, "signal singles spectrum");
  write_singles(out / "singles_idler.csv", si, "idler singles spectrum");
  const CountSummary c = count_summary(signal, idler);
  Json s;
  s["mode"] = "singles";
  s["duration_s"] = c.duration_s;
  Json singles = Json::object();
  for (const auto& [ch, e] : c.singles_hz) singles[ch == 0 ? "signal" : "idler"] = estimate_json(e);
  s["singles_hz"] = singles;
  s["coincidence_hz"] = estimate_json(c.coincidence_hz);
  s["demux_discarded"] = discarded;
  s["signal"] = {{"binned", ss.binned}, {"alias", ss.alias}, {"discarded", ss.discarded}};
  s["idler"] = {{"binned", si.binned}, {"alias", si.alias}, {"discarded", si.discarded}};
  write_json(out / "summary.json", s);
}

void analyze_hom(const RunFiles& r, const fs::path& out) {
  require_kind(r, {RunKind::hom}, "hom");
  HomScan scan;
  for (const auto& row : read_table(r.dir / "hom_scan.csv", 5)) {
    scan.delays_ps.push_back(row[0]);
    scan.pulses.push_back(row[1]);
    scan.coincidences.push_back(row[2]);
    scan.singles_c.push_back(row[3]);
    scan.singles_d.push_back(row[4]);
  }
  const auto bg_rows = read_table(r.dir / "hom_background.csv", 4);
  if (bg_rows.size() != 1) throw Error(ErrorKind::io, "hom_background.csv must hold one row");
  const BackgroundRun bg{bg_rows[0][0], bg_rows[0][1], bg_rows[0][2], bg_rows[0][3]};
  const HomAnalysis h = hom_analysis(scan, bg);
  {
    auto f = open_out(out / "hom_curves.csv");
    CsvWriter w(f);
    w.comment("coincidences per pulse at each correction level");
    w.header({"delay_ps", "raw", "background_subtracted", "accidental_corrected", "accidentals"});
    for (std::size_t k = 0; k < scan.delays_ps.size(); ++k)
      w.row({scan.delays_ps[k], h.raw_curve[k], h.background_subtracted_curve[k], h.corrected_curve[k],
             h.accidentals[k]});
  }
  Json s;
  s["mode"] = "hom";
  s["visibility_raw"] = estimate_json(h.raw);
  s["visibility_background_subtracted"] = estimate_json(h.background_subtracted);
  s["visibility_accidental_corrected"] = estimate_json(h.accidental_corrected);
  write_json(out / "summary.json", s);
}

std::vector<std::uint32_t> column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<std::uint32_t> v(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) v[i] = static_cast<std::uint32_t>(rows[i][c]);
  return v;
}

void analyze_g2(const RunFiles& r, const fs::path& out) {
  const std::string kind = require_kind(r, {RunKind::correlation, RunKind::tes}, "g2");
  Json s;
  s["mode"] = "g2";
  if (kind == to_string(RunKind::correlation)) {
    const TagStream start = read_tag_stream(r.dir / "start.bin");
    const TagStream stop = read_tag_stream(r.dir / "stop.bin");
    const double zero = r.info.value("zero_delay_ps", 0.0);
    const G2Estimate g = g2_peak_ratio(start.records, stop.records, start.clock_period_ps, r.cfg.analysis.side_peaks, zero);
    auto f = open_out(out / "g2_peaks.csv");
    CsvWriter w(f);
    w.comment("start-stop coincidences per clock-period window");
    w.header({"peak", "area"});
    const auto n = static_cast<long>(r.cfg.analysis.side_peaks);
    for (long k = -n; k <= n; ++k) w.row({static_cast<double>(k), g.peak_areas[static_cast<std::size_t>(k + n)]});
    s["method"] = "peak_ratio";
    s["g2"] = g.g2;
    s["sigma"] = g.sigma;
    s["zero_peak"] = g.zero_peak;
    s["side_mean"] = g.side_mean;
  } else {
    const auto rows = read_table(r.dir / "tes.csv", 3);
    const auto c = column(rows, 1), d = column(rows, 2);
    s["method"] = "photon_number";
    s["g2_c"] = estimate_json(g2_from_samples(c));
    s["g2_d"] = estimate_json(g2_from_samples(d));
    s["g2_cross"] = estimate_json(g2_cross_from_samples(c, d));
    s["pulses"] = rows.size();
  }
  write_json(out / "summary.json", s);
}

}  // namespace

std::string git_blob_hash(const std::string& content) {
  const std::string head = "blob " + std::to_string(content.size()) + '\0';
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error(ErrorKind::io, "cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error(ErrorKind::io, "SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void cmd_jsa(const CommandOptions& opt) {
  apply_threads(opt);
  const ExperimentConfig cfg = load_config(opt.config);
  prepare_dir(opt.out);
  write_manifest(opt.out, "jsa", {{"config", cfg.text}, {"invocation", invocation("jsa", opt, std::nullopt)}},
                 opt.config, &cfg, std::nullopt);

  const JointSpectralAmplitude jsa = build_source_jsa(cfg);
  const SchmidtDecomposition dec = schmidt_decompose(jsa);
  const auto& g = jsa.grid;
  const auto ws = axis(g.signal_min, g.signal_step(), g.n_signal);
  const auto wi = axis(g.idler_min, g.idler_step(), g.n_idler);
  const auto ls = wavelengths_nm(ws), li = wavelengths_nm(wi);
  auto at = [](const ComplexMatrix& m, std::size_t j, std::size_t k) {
    return m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  };

  write_matrix(opt.out / "jsa_abs.csv", "|Psi| (s^1/2 per rad), sum |Psi|^2 dws dwi = 1", ls, li,
               [&](std::size_t j, std::size_t k) { return std::abs(at(jsa.amplitude, j, k)); });
  write_matrix(opt.out / "jsa_phase.csv", "arg Psi (rad)", ls, li,
               [&](std::size_t j, std::size_t k) { return std::arg(at(jsa.amplitude, j, k)); });
  {
    auto f = open_out(opt.out / "schmidt.csv");
    CsvWriter w(f);
    w.header({"n", "lambda"});
    for (std::size_t n = 0; n < dec.weights.size(); ++n) w.row({static_cast<double>(n + 1), dec.weights[n]});
  }
  const std::size_t shown = std::min<std::size_t>(5, dec.rank());
  write_modes(opt.out / "modes_signal.csv", dec.signal_modes, ws, shown);
  write_modes(opt.out / "modes_idler.csv", dec.idler_modes, wi, shown);
  const auto [ms, mi] = marginal_spectra(jsa.intensity(), g);
  write_marginals(opt.out / "marginals.csv", ms, mi);

  Json report;
  report["grid"] = {{"points", g.n_signal},
                    {"signal_min_nm", omega_to_wavelength(g.signal_max) * 1e9},
                    {"signal_max_nm", omega_to_wavelength(g.signal_min) * 1e9}};
  report["unfiltered"] = decomposition_summary(dec, jsa);
  report["unfiltered"]["spectra"] = spectrum_summary(jsa);
  const auto& f_s = cfg.run.filter_signal;
  const auto& f_i = cfg.run.filter_idler;
  if (!f_s.is_all_pass() || !f_i.is_all_pass()) {
    const FilterResult fr = apply_filter(jsa, f_s, f_i);
    const SchmidtDecomposition fdec = schmidt_decompose(fr.jsa);
    write_matrix(opt.out / "jsa_filtered_abs.csv", "|Psi| after filtering, renormalised", ls, li,
                 [&](std::size_t j, std::size_t k) { return std::abs(at(fr.jsa.amplitude, j, k)); });
    const auto [fs_, fi_] = marginal_spectra(fr.jsa.intensity(), g);
    write_marginals(opt.out / "marginals_filtered.csv", fs_, fi_);
    Json fj = decomposition_summary(fdec, fr.jsa);
    fj["main_mode_transmission_signal"] = fr.signal_mode_transmission.front();
    fj["main_mode_transmission_idler"] = fr.idler_mode_transmission.front();
    fj["higher_order_transmission_signal"] = fr.signal_higher_order_transmission;
    fj["higher_order_transmission_idler"] = fr.idler_higher_order_transmission;
    fj["spectra"] = spectrum_summary(fr.jsa);
    if (g.symmetric()) fj["hom_single_pair"] = hom_model_summary(fr.jsa, opt.out / "hom_model.csv");
    report["filtered"] = fj;
  } else if (g.symmetric()) {
    report["unfiltered"]["hom_single_pair"] = hom_model_summary(jsa, opt.out / "hom_model.csv");
  }
  const double mu = cfg.run.source.mean_total_photons;
  report["mean_photons"] = mu;
  report["squeezing_db"] = mean_photons_to_squeezing_db(mu);
  write_json(opt.out / "report.json", report);
}

void cmd_calibrate(const CommandOptions& opt) {
  apply_threads(opt);
  if (opt.input.empty()) throw Error(ErrorKind::argument, "calibrate needs a CSV of wavelength_nm,delay_ps");
  const std::string points_text = read_file(opt.input);
  std::optional<ExperimentConfig> cfg;
  if (!opt.config.empty()) cfg = load_config(opt.config);
  prepare_dir(opt.out);
  std::vector<Input> inputs{{"points", points_text}, {"invocation", invocation("calibrate", opt, std::nullopt)}};
  if (cfg) inputs.push_back({"config", cfg->text});
  write_manifest(opt.out, "calibrate", inputs, opt.config, cfg ? &*cfg : nullptr, std::nullopt);

  std::vector<CalibrationPoint> pts;
  for (const auto& row : read_table(opt.input, 2)) pts.push_back({row[0], row[1]});
  const DispersionModel m = fit_dispersion(pts);
  {
    auto f = open_out(opt.out / "dispersion.ini");
    f << to_key_value(m);
  }
  {
    auto f = open_out(opt.out / "residuals.csv");
    CsvWriter w(f);
    w.header({"wavelength_nm", "delay_ps", "fit_ps", "residual_ps"});
    for (const auto& p : pts) {
      const double fit = m.delay(p.wavelength_nm);
      w.row({p.wavelength_nm, p.delay_ps, fit, p.delay_ps - fit});
    }
  }
  const DetectorModel det = cfg ? cfg->run.detector_signal : DetectorModel{};
  Json r;
  r["zero_dispersion_nm"] = m.zero_dispersion_nm;
  r["zero_dispersion_sigma_nm"] = m.zero_dispersion_sigma_nm;
  r["zero_dispersion_ci95_nm"] = m.zero_dispersion_ci95_nm();
  r["residual_rms_ps"] = m.residual_rms_ps;
  r["points"] = m.n_points;
  r["coefficients_ps_per_nm^k"] = {m.coeffs[0], m.coeffs[1], m.coeffs[2], m.coeffs[3]};
  r["reference_nm"] = m.reference_nm;
  if (1570.0 >= m.range_min_nm && 1570.0 <= m.range_max_nm) {
    r["dispersion_at_1570_ps_per_nm"] = m.dispersion(1570.0);
    const Resolution res = resolution(m, det, 1570.0);
    r["resolution_at_1570_nm"] = res.divergent ? Json(nullptr) : Json(res.sigma_nm);
  }
  write_json(opt.out / "report.json", r);
}

void cmd_simulate(const CommandOptions& opt) {
  apply_threads(opt);
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.run.rng_seed = *opt.seed;
  const std::uint64_t seed = cfg.run.rng_seed;
  prepare_dir(opt.out);
  write_manifest(opt.out, "simulate", {{"config", cfg.text}, {"invocation", invocation("simulate", opt, seed)}},
                 opt.config, &cfg, seed);
  {
    // The run directory carries its own configuration for analyze.
    auto f = open_out(opt.out / "config.ini");
    f << cfg.text;
  }

  const JointSpectralAmplitude jsa = build_source_jsa(cfg);
  const RunConfig run = resolve_run(cfg, jsa);
  Json info;
  info["kind"] = to_string(cfg.kind);
  info["seed"] = seed;
  info["pulses"] = run.n_pulses;
  info["repetition_rate_hz"] = run.repetition_rate_hz;
  info["schmidt_modes"] = run.source.schmidt_weights.size();
  info["K_source_weights"] = effective_mode_number(run.source.schmidt_weights);

  switch (cfg.kind) {
    case RunKind::tags: {
      const TagRun t = simulate_tag_run(run);
      write_tag_stream(opt.out / "tags.bin", t.stream);
      std::array<std::uint64_t, 3> by_origin{};
      for (auto o : t.origin) ++by_origin[static_cast<std::size_t>(o)];
      info["emitted_pairs"] = t.emitted_pairs;
      info["tags"] = t.stream.records.size();
      info["signal_tags"] = by_origin[0];
      info["idler_tags"] = by_origin[1];
      info["dark_tags"] = by_origin[2];
      info["deadtime_losses"] = t.deadtime_losses;
      break;
    }
    case RunKind::hom: {
      const HomRun h = simulate_hom_run(run);
      {
        auto f = open_out(opt.out / "hom_scan.csv");
        CsvWriter w(f);
        w.comment("delays relative to the model dip (ps); counts are TES coincidences (both n >= 1)");
        w.header({"delay_ps", "pulses", "coincidences", "singles_c", "singles_d", "model_single_pair_pc",
                  "single_pair_coincidences", "multi_pair_coincidences"});
        for (std::size_t k = 0; k < h.scan.delays_ps.size(); ++k)
          w.row({h.scan.delays_ps[k], h.scan.pulses[k], h.scan.coincidences[k], h.scan.singles_c[k],
                 h.scan.singles_d[k], h.single_pair_coincidence[k], h.single_pair_coincidences[k],
                 h.multi_pair_coincidences[k]});
      }
      {
        auto f = open_out(opt.out / "hom_background.csv");
        CsvWriter w(f);
        w.comment("pump-blocked run");
        w.header({"pulses", "coincidences", "singles_c", "singles_d"});
        w.row({h.background.pulses, h.background.coincidences, h.background.singles_c, h.background.singles_d});
      }
      info["dip_delay_ps"] = h.dip_delay_ps;
      info["single_pair_pulses"] = h.single_pair_pulses;
      info["multi_pair_pulses"] = h.multi_pair_pulses;
      info["truncated_pulses"] = h.truncated_pulses;
      break;
    }
    case RunKind::tes: {
      const auto rec = simulate_tes_run(run, cfg.tes_geometry, cfg.tes_delay_ps);
      auto f = open_out(opt.out / "tes.csv");
      write_tes_csv(f, rec);
      info["records"] = rec.size();
      break;
    }
    case RunKind::correlation: {
      const CorrelationRun c = simulate_correlation_run(run, cfg.correlation);
      write_tag_stream(opt.out / "start.bin", c.start);
      write_tag_stream(opt.out / "stop.bin", c.stop);
      info["zero_delay_ps"] = c.zero_delay_ps;
      info["start_tags"] = c.start.records.size();
      info["stop_tags"] = c.stop.records.size();
      break;
    }
  }
  write_json(opt.out / "run.json", info);
}

void cmd_analyze(const CommandOptions& opt) {
  apply_threads(opt);
  const RunFiles r = open_run(opt);
  const std::uint64_t seed = opt.seed ? *opt.seed : r.cfg.run.rng_seed;
  const fs::path out = opt.out.empty() ? r.dir / ("analysis_" + opt.mode) : opt.out;
  prepare_dir(out);

  std::vector<Input> inputs{{"config", r.cfg.text},
                            {"run.json", read_file(r.dir / "run.json")},
                            {"invocation", invocation("analyze", opt, seed)}};
  for (const char* name : {"tags.bin", "hom_scan.csv", "hom_background.csv", "tes.csv", "start.bin", "stop.bin"})
    if (fs::exists(r.dir / name)) inputs.push_back({name, read_file(r.dir / name)});
  write_manifest(out, "analyze", inputs, r.config_path, &r.cfg, seed);

  if (opt.mode == "joint") {
    analyze_joint(opt, r, out, seed);
  } else if (opt.mode == "singles") {
    analyze_singles(r, out);
  } else if (opt.mode == "hom") {
    analyze_hom(r, out);
  } else if (opt.mode == "g2") {
    analyze_g2(r, out);
  } else {
    throw Error(ErrorKind::argument, "unknown analysis mode '" + opt.mode + "'");
  }
}

void cmd_theory(const CommandOptions& opt) {
  apply_threads(opt);
  if (!(opt.mean_min > 0.0) || !(opt.mean_max >= opt.mean_min) || opt.points == 0)
    throw Error(ErrorKind::argument, "theory needs 0 < mean_min <= mean_max and at least one point");
  prepare_dir(opt.out);
  std::optional<ExperimentConfig> cfg;
  if (!opt.config.empty()) cfg = load_config(opt.config);
  std::vector<Input> inputs{{"invocation", invocation("theory", opt, std::nullopt)}};
  if (cfg) inputs.push_back({"config", cfg->text});
  write_manifest(opt.out, "theory", inputs, opt.config, cfg ? &*cfg : nullptr, std::nullopt);

  // Logarithmic spacing, as the photon-number axis spans decades.
  std::vector<double> mu(opt.points);
  const double a = std::log(opt.mean_min), b = std::log(opt.mean_max);
  for (std::size_t i = 0; i < opt.points; ++i)
    mu[i] = opt.points == 1 ? opt.mean_min
                            : std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(opt.points - 1));
  const auto curve = theory_curves(mu);
  auto f = open_out(opt.out / "theory.csv");
  write_csv(f, curve);
}

}  // namespace sqz::cli
