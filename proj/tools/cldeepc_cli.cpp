// Command line front end: simulate, sweep, correlation, bias.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cldeepc/experiments.hpp"
#include "cldeepc/predictors.hpp"

namespace {

using namespace cldeepc;

struct CommonFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> controller;
  std::optional<Index> nbar;
  std::optional<int> p, f, realizations, threads;
  std::optional<double> noise_var;
  std::optional<std::uint64_t> seed;
  std::optional<Index> steps;
  std::optional<std::string> out;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--controller", flags.controller, "deepc | cl-deepc | oracle");
  cmd->add_option("--nbar", flags.nbar, "data window length");
  cmd->add_option("--p", flags.p, "past window");
  cmd->add_option("--f", flags.f, "prediction horizon");
  cmd->add_option("--noise-var", flags.noise_var, "innovation variance");
  cmd->add_option("--seed", flags.seed, "base seed");
  cmd->add_option("--realizations", flags.realizations, "number of realizations");
  cmd->add_option("--steps", flags.steps, "closed-loop steps");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--threads", flags.threads, "worker threads (0: all cores)");
  cmd->add_flag("--timing", flags.timing, "record mean solve time (not reproducible)");
}

ExperimentConfig resolve(const CommonFlags& flags) {
  ExperimentConfig c;
  if (flags.config_file) c = load_config_file(*flags.config_file, c);
  if (flags.controller) c.controller = parse_controller_kind(*flags.controller);
  if (flags.nbar) c.nbar = *flags.nbar;
  if (flags.p) c.p = *flags.p;
  if (flags.f) c.f = *flags.f;
  if (flags.noise_var) c.noise_variance = *flags.noise_var;
  if (flags.seed) c.base_seed = *flags.seed;
  if (flags.realizations) c.realizations = *flags.realizations;
  if (flags.steps) c.steps = *flags.steps;
  if (flags.out) c.output_dir = *flags.out;
  if (flags.threads) c.threads = *flags.threads;
  if (flags.timing) c.record_timing = true;
  c.validate();
  return c;
}

void print_summary(const MetricsReport& report) {
  for (const PercentileRow& row : report.percentiles)
    std::cout << report.axis << '=' << row.axis_value << ' ' << to_string(row.controller)
              << " median J_rms " << row.values[2] << " (n=" << row.count << ")\n";
  for (const PercentileRow& row : report.bias_percentiles)
    std::cout << "nbar=" << row.axis_value << ' ' << to_string(row.controller)
              << " median |Tu error| " << row.values[2] << '\n';
  for (const RealizationRecord& rec : report.realizations)
    if (!rec.error.empty())
      std::cerr << "failed cell " << report.axis << '=' << rec.axis_value << " seed " << rec.seed
                << ' ' << to_string(rec.controller) << ": " << rec.error << '\n';
}

int run_simulate(const ExperimentConfig& c) {
  const TrackingRun run = run_tracking(c, 0);
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream sig(dir / "signals.csv", std::ios::binary);
    write_signal_csv(sig, run.log);
  }
  if (run.final_predictor) {
    std::ofstream js(dir / "predictor.json", std::ios::binary);
    js << to_json(*run.final_predictor) << '\n';
  }
  MetricsReport report;
  report.axis = "none";
  append_runs(report, 0.0, std::span<const TrackingRun>(&run, 1));
  summarize(report);
  emit_report(report, dir);
  {
    std::ofstream cfg(dir / "config.txt", std::ios::binary);
    write_config(cfg, c);
  }
  std::cout << to_string(run.controller) << " seed " << run.seed << ": J_rms " << run.j_rms
            << ", softened solves " << run.stats.softened_solves << ", ill-conditioned fits "
            << run.stats.ill_conditioned_fits << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop data-enabled predictive control experiments"};
  app.require_subcommand(1);

  CommonFlags sim_flags, sweep_flags, corr_flags, bias_flags;
  auto* sim = app.add_subcommand("simulate", "single tracking run; writes signals.csv");
  add_common(sim, sim_flags);

  auto* sw = app.add_subcommand("sweep", "J_rms percentiles over one parameter axis");
  add_common(sw, sweep_flags);
  std::string axis_name;
  std::vector<double> values;
  sw->add_option("--axis", axis_name, "nbar | noise | pf")
      ->required()
      ->check(CLI::IsMember({"nbar", "noise", "pf"}));
  sw->add_option("--values", values, "axis values")->required()->delimiter(',');

  auto* corr = app.add_subcommand("correlation", "closed-loop noise/input correlation matrices");
  add_common(corr, corr_flags);

  auto* bias = app.add_subcommand("bias", "Tu estimation error against nbar");
  add_common(bias, bias_flags);
  std::vector<double> nbars{200, 400, 800, 1600};
  bias->add_option("--values", nbars, "nbar values")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(resolve(sim_flags));
    if (sw->parsed()) {
      const ExperimentConfig c = resolve(sweep_flags);
      const MetricsReport report = sweep(c, parse_sweep_axis(axis_name), values);
      emit_report(report, c.output_dir);
      print_summary(report);
      return 0;
    }
    if (corr->parsed()) {
      const ExperimentConfig c = resolve(corr_flags);
      const MetricsReport report = correlation_study(c);
      emit_report(report, c.output_dir);
      for (const CorrelationResult& cr : report.correlations) {
        const Matrix z = cr.mean.cwiseQuotient(cr.standard_error.cwiseMax(1e-300));
        std::cout << to_string(cr.controller) << ": max |mean| " << cr.mean.cwiseAbs().maxCoeff()
                  << ", max |mean|/stderr " << z.cwiseAbs().maxCoeff() << '\n';
      }
      return 0;
    }
    if (bias->parsed()) {
      ExperimentConfig c = resolve(bias_flags);
      const MetricsReport report = bias_analysis(c, nbars);
      emit_report(report, c.output_dir);
      print_summary(report);
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
