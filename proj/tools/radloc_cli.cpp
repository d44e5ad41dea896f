// radloc: bounds, single-shot estimation and Monte Carlo experiments from a
// JSON scenario file. Exit codes: 0 ok, 1 runtime failure, 2 usage/config error.

#include "radloc/config.hpp"
#include "radloc/errors.hpp"
#include "radloc/harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace radloc;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string experiment;
  bool independent = false;
};

ScenarioConfig load(const Options& o) {
  ScenarioConfig c = o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.experiment.empty()) c.experiment.name = o.experiment;
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "Scenario JSON file (defaults to the reference scene)");
  cmd->add_option("--seed", o.seed, "Master seed, overrides the config");
  cmd->add_option("--out", o.out_dir, "Output directory for CSV files and the run manifest");
  cmd->add_option("--threads", o.threads, "OpenMP thread count (0 = runtime default)")->check(CLI::NonNegativeNumber);
}

void write_outputs(const Options& o, const ScenarioConfig& c, const std::string& name, const ExperimentResult& r) {
  if (o.out_dir.empty()) return;
  fs::create_directories(o.out_dir);
  RunManifest m{name, c.seed, config_hash(c), omp_get_max_threads(), r.failures, {}};
  const std::string rows = name + ".csv", summary = name + "_summary.csv";
  write_csv_file((fs::path(o.out_dir) / rows).string(), r.rows);
  write_csv_file((fs::path(o.out_dir) / summary).string(), r.summary);
  m.outputs = {rows, summary};
  write_manifest((fs::path(o.out_dir) / "manifest.json").string(), m);
}

int cmd_bounds(const Options& o) {
  const ScenarioConfig c = load(o);
  BoundsOptions opt;
  opt.independent = o.independent;
  const BoundsReport b = scenario_bounds(c, opt);
  std::printf("OEB  %s\n", format_number(b.oeb).c_str());
  std::printf("PEB  %s m\n", format_number(b.peb).c_str());
  std::printf("IPEB %s m\n", format_number(b.ipeb).c_str());
  std::printf("SEB  %s s\n", format_number(b.seb).c_str());
  if (!b.identifiable) std::printf("not identifiable (rank deficiency %d)\n", b.rank_deficiency);
  ExperimentResult r;
  const double m = static_cast<double>(c.scene.num_ips());
  for (auto [k, v] : {std::pair{"oeb", b.oeb}, {"peb", b.peb}, {"ipeb", b.ipeb}, {"seb", b.seb}}) {
    r.rows.push_back({"num_ips", m, -1, k, v});
  }
  write_outputs(o, c, "bounds", r);
  return 0;
}

int cmd_estimate(const Options& o) {
  ScenarioConfig c = load(o);
  c.experiment.name = "rmse_vs_power";
  c.experiment.trials = 1;
  c.experiment.transmit_power_dbm = {c.signal.transmit_power_dbm};
  const ExperimentResult r = run_rmse_vs_power(c);
  for (const auto& row : r.rows) std::printf("%-24s %s\n", row.metric.c_str(), format_number(row.value).c_str());
  write_outputs(o, c, "estimate", r);
  return r.failures == 0 ? 0 : 1;
}

int cmd_experiment(const Options& o) {
  const ScenarioConfig c = load(o);
  const ExperimentResult r = run_experiment(c);
  write_csv(std::cout, r.summary);
  write_outputs(o, c, c.experiment.name, r);
  if (r.failures > 0) std::fprintf(stderr, "%d trial(s) failed; see the 'failed' rows\n", r.failures);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-BS 6D radio localization: bounds, estimators and experiments"};
  app.require_subcommand(1);
  Options o;

  auto* bounds = app.add_subcommand("bounds", "Print OEB/PEB/IPEB/SEB for the configured scene");
  add_common(bounds, o);
  bounds->add_flag("--independent", o.independent, "Use the decorrelated channel-parameter FIM");

  auto* estimate = app.add_subcommand("estimate", "One noisy realisation through the ad-hoc and ML estimators");
  add_common(estimate, o);

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  add_common(experiment, o);
  auto* name_pos = experiment->add_option("name", o.experiment, "rmse_vs_power | bound_cdf | parameter_sweep | coverage_contour");
  experiment->add_option("--experiment", o.experiment, "Same as the positional name")->excludes(name_pos);

  auto* validate = app.add_subcommand("validate-config", "Check a scenario file against the schema");
  validate->add_option("--config", o.config_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (o.threads > 0) omp_set_num_threads(o.threads);
    if (*bounds) return cmd_bounds(o);
    if (*estimate) return cmd_estimate(o);
    if (*experiment) return cmd_experiment(o);
    if (*validate) {
      load(o);
      std::printf("ok\n");
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
