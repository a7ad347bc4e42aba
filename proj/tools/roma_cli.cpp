#include "roma/errors.hpp"
#include "roma/io.hpp"
#include "roma/simulation.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

void apply_thread_env() {
  const char* v = std::getenv("ROMA_NUM_THREADS");
  if (!v || !*v) return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw roma::ConfigError("ROMA_NUM_THREADS must be a positive integer");
  omp_set_num_threads(static_cast<int>(n));
}

template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw roma::ConfigError("cannot open output '" + path + "'");
  fn(out);
}

struct FitArgs {
  std::string config, data, out, csv;
  bool no_tests = false;
};

roma::io::FittedModel load_and_fit(const FitArgs& a, roma::io::RunConfig& config) {
  config = roma::io::read_config_file(a.config);
  return roma::io::fit_dataset(config, roma::io::read_dataset_file(a.data, config.data));
}

void cmd_fit(const FitArgs& a) {
  roma::io::RunConfig config;
  const auto model = load_and_fit(a, config);
  const auto summary = roma::io::summarize_fit(model.fit, model.selection, config.seed);
  with_output(a.out, [&](std::ostream& os) { os << roma::io::fit_to_json(summary).dump() << '\n'; });
}

void cmd_effects(const FitArgs& a) {
  roma::io::RunConfig config;
  const auto model = load_and_fit(a, config);
  roma::InferenceOptions options;
  options.q = config.q;
  options.truncation = config.truncation;
  options.run_tests = !a.no_tests;
  for (const auto& d : config.directions) {
    options.directions.push_back(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
  }
  const auto x = config.data.exposure.parse(config.x);
  const auto xs = config.data.exposure.parse(config.x_star);
  const auto report = roma::io::report_effects(model.fit, x, xs, options);
  with_output(a.out, [&](std::ostream& os) { roma::io::write_effects(os, report); });
  if (!a.csv.empty()) with_output(a.csv, [&](std::ostream& os) { roma::io::write_effects_csv(os, report); });
}

struct SimArgs {
  std::string scenario = "I.1", mode = "nonlinear", out, csv;
  std::size_t n = 100, m = 100, grid = 100, reps = 100, oracle = 100000;
  std::uint64_t seed = 1;
  double x = 1.0, x_star = 0.0, q = 0.05, direct_scale = 1.0, indirect_scale = 1.0;
  long truncation = 0;
  bool fixed = false, timing = false, mediator_first = false;
};

void cmd_simulate(const SimArgs& a) {
  roma::CampaignConfig c;
  c.spec.id = roma::scenario_from_string(a.scenario);
  c.spec.mode = roma::kernel_mode_from_string(a.mode);
  c.spec.n = a.n;
  c.spec.m = a.m;
  c.spec.grid_size = a.grid;
  c.spec.seed = a.seed;
  c.spec.direct_scale = a.direct_scale;
  c.spec.indirect_scale = a.indirect_scale;
  c.reps = a.reps;
  c.oracle_size = a.oracle;
  c.x = a.x;
  c.x_star = a.x_star;
  c.inference.q = a.q;
  if (a.truncation > 0) c.inference.truncation = a.truncation;
  c.tune = !a.fixed;
  if (a.mediator_first) c.tuning.mode = roma::TuningMode::MediatorFirst;
  const auto t0 = std::chrono::steady_clock::now();
  roma::ReplicationReport report = roma::run_campaign(c);
  if (a.timing) {
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "runtime " << *report.runtime_seconds << " s\n";
  }
  with_output(a.out, [&](std::ostream& os) { roma::io::write_report(os, report); });
  if (!a.csv.empty()) with_output(a.csv, [&](std::ostream& os) { roma::io::write_report_csv(os, report); });
  for (const auto& msg : report.failure_messages) std::cerr << "warning: " << msg << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random object mediation analysis"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Tune and fit; write the fit summary");
  fit->add_option("--config", fit_args.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  fit->add_option("--data", fit_args.data, "CSV dataset")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_args.out, "Output file (default stdout)");

  FitArgs eff_args;
  auto* eff = app.add_subcommand("effects", "Estimate NDE, NIE and TE with intervals and tests");
  eff->add_option("--config", eff_args.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  eff->add_option("--data", eff_args.data, "CSV dataset")->required()->check(CLI::ExistingFile);
  eff->add_option("--out", eff_args.out, "Output file (default stdout)");
  eff->add_option("--csv", eff_args.csv, "Flat CSV for plotting");
  eff->add_flag("--no-tests", eff_args.no_tests, "Skip the global tests");

  SimArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run a replication campaign");
  sim->add_option("--scenario", sim_args.scenario, "I.1 to I.4 or II.1 to II.8")->capture_default_str();
  sim->add_option("--mode", sim_args.mode, "linear or nonlinear")->capture_default_str();
  sim->add_option("--n", sim_args.n, "Sample size")->capture_default_str();
  sim->add_option("--m", sim_args.m, "Draws per observed distribution")->capture_default_str();
  sim->add_option("--grid", sim_args.grid, "Quantile grid size")->capture_default_str();
  sim->add_option("--reps", sim_args.reps, "Replicates")->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "Campaign seed")->capture_default_str();
  sim->add_option("--x", sim_args.x, "Exposure level x")->capture_default_str();
  sim->add_option("--xstar", sim_args.x_star, "Reference level x*")->capture_default_str();
  sim->add_option("--q", sim_args.q, "Interval and test level")->capture_default_str();
  sim->add_option("--l", sim_args.truncation, "Spectrum truncation (default min(n, d))");
  sim->add_option("--direct-scale", sim_args.direct_scale, "Multiplier on the direct pathway")->capture_default_str();
  sim->add_option("--indirect-scale", sim_args.indirect_scale, "Multiplier on the mediated pathway")
      ->capture_default_str();
  sim->add_option("--oracle-size", sim_args.oracle, "Monte Carlo draws for the true effects")->capture_default_str();
  sim->add_flag("--fixed", sim_args.fixed, "Median-heuristic bandwidths and fixed relative regularization");
  sim->add_flag("--mediator-first", sim_args.mediator_first, "Tune kernels on the mediator criterion");
  sim->add_option("--out", sim_args.out, "Report file (default stdout)");
  sim->add_option("--csv", sim_args.csv, "Flat CSV for plotting");
  sim->add_flag("--timing", sim_args.timing, "Record wall-clock runtime");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    apply_thread_env();
    if (*fit) cmd_fit(fit_args);
    else if (*eff) cmd_effects(eff_args);
    else if (*sim) cmd_simulate(sim_args);
  } catch (const roma::Error& e) {
    std::cerr << "error (" << e.kind() << "): " << e.what() << '\n';
    return roma::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
