// sqz: joint spectra, synthetic runs and their analysis for pulsed two-mode squeezers.

#include <iostream>

#include "CLI11.hpp"
#include "sqz/cli/commands.hpp"
#include "sqz/errors.hpp"

int main(int argc, char** argv) {
  using namespace sqz::cli;
  CLI::App app{"Pulsed squeezed-light source simulator and time-tag analysis"};
  app.require_subcommand(1);
  CommandOptions opt;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config, "experiment configuration (INI)");
    if (config_required) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory")->required(sub->get_name() != "analyze");
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
  };

  auto* jsa = app.add_subcommand("jsa", "joint spectral amplitude, Schmidt table, K and K_ABS");
  add_common(jsa, true);

  auto* cal = app.add_subcommand("calibrate", "fit the fibre group-delay polynomial");
  add_common(cal, false);
  cal->add_option("points", opt.input, "CSV of wavelength_nm,delay_ps")->required()->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate", "generate a synthetic run (tags, HOM scan, TES records)");
  add_common(sim, true);
  sim->add_option("--seed", opt.seed, "override run.seed");

  auto* ana = app.add_subcommand("analyze", "analyze a run directory");
  add_common(ana, false);
  ana->add_option("run", opt.input, "run directory written by simulate")->required()->check(CLI::ExistingDirectory);
  ana->add_option("--mode", opt.mode, "analysis")->required()->check(CLI::IsMember({"joint", "hom", "g2", "singles"}));
  ana->add_option("--resamples", opt.resamples, "bootstrap resamples")->check(CLI::Range(100, 1000000));
  ana->add_option("--seed", opt.seed, "bootstrap seed (default: the run seed)");

  auto* th = app.add_subcommand("theory", "closed-form g2 curves versus mean photon number");
  add_common(th, false);
  th->add_option("--mean-min", opt.mean_min, "smallest mean photon number");
  th->add_option("--mean-max", opt.mean_max, "largest mean photon number");
  th->add_option("--points", opt.points, "number of points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*jsa) cmd_jsa(opt);
    if (*cal) cmd_calibrate(opt);
    if (*sim) cmd_simulate(opt);
    if (*ana) cmd_analyze(opt);
    if (*th) cmd_theory(opt);
  } catch (const sqz::Error& e) {
    std::cerr << "sqz: " << e.what() << '\n';
    return e.kind() == sqz::ErrorKind::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "sqz: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
