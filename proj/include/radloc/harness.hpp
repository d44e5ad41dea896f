#pragma once

#include "radloc/config.hpp"
#include "radloc/fisher.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace radloc {

/// One long-format CSV row. trial = -1 marks a per-sweep-point value that is
/// not tied to a single trial.
struct ResultRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  int trial = -1;
  std::string metric;
  double value = 0.0;
};

struct ExperimentResult {
  std::string name;
  std::vector<ResultRow> rows;     // per trial / per grid cell
  std::vector<ResultRow> summary;  // aggregates per sweep point
  int failures = 0;

  /// Every row whose metric equals `metric`, in emission order.
  std::vector<double> values(const std::string& metric, const std::string& sweep_var = {}) const;
  double summary_value(const std::string& metric, double sweep_value, const std::string& sweep_var = {}) const;
};

/// Trials run under OpenMP when exec is parallel. Every trial owns an RNG
/// derived from (seed, sweep point, trial), and rows are merged in trial
/// order, so the output does not depend on the thread count.
ExperimentResult run_rmse_vs_power(const ScenarioConfig& config, Exec exec = Exec::parallel);
ExperimentResult run_bound_cdf(const ScenarioConfig& config, Exec exec = Exec::parallel);
ExperimentResult run_parameter_sweep(const ScenarioConfig& config, Exec exec = Exec::parallel);
ExperimentResult run_coverage_contour(const ScenarioConfig& config, Exec exec = Exec::parallel);
/// Dispatches on config.experiment.name.
ExperimentResult run_experiment(const ScenarioConfig& config, Exec exec = Exec::parallel);

/// Bounds for the configured scene, beams and gains drawn from
/// derive_rng(seed, 0, 0).
BoundsReport scenario_bounds(const ScenarioConfig& config, const BoundsOptions& options = {});

inline constexpr const char* kCsvHeader = "sweep_var,sweep_value,trial,metric,value";

/// %.17g, with "inf" / "-inf" / "nan" for non-finite values.
std::string format_number(double v);
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_csv_file(const std::string& path, const std::vector<ResultRow>& rows);

struct RunManifest {
  std::string experiment;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  int threads = 1;
  int failures = 0;
  std::vector<std::string> outputs;
};

std::string library_version();
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace radloc
