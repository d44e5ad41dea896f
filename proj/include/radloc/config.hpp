#pragma once

#include "radloc/adhoc.hpp"
#include "radloc/geometry.hpp"
#include "radloc/ml.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace radloc {

struct SignalSpec {
  double carrier_frequency = 28e9;
  double subcarrier_spacing = 120e3;
  int num_subcarriers = 3333;
  int num_symbols = 10;
  double transmit_power_dbm = 10.0;
  double noise_psd_dbm_per_hz = -174.0;
  double noise_figure_db = 13.0;
  int bs_array_side = 8;
  int ue_array_side = 2;

  /// Beamformers are left empty; draw_beams fills them per trial.
  SignalConfig build() const;
};

struct ExperimentSpec {
  std::string name = "rmse_vs_power";
  int trials = 100;

  // rmse_vs_power
  std::vector<double> transmit_power_dbm = {0.0, 5.0, 10.0, 15.0, 20.0};

  // bound_cdf
  std::string randomize = "full";  // "full" or "ue_plane"
  std::vector<std::string> known = {"none", "rotation", "position", "clock_bias"};
  Vec3 box_min = Vec3(0.0, 0.0, 0.0);
  Vec3 box_max = Vec3(8.0, 8.0, 4.0);
  double plane_height = 1.0;

  // parameter_sweep
  std::string axis = "bandwidth";  // bandwidth, N_UE, N_BS, num_IPs
  std::vector<double> values = {12e6, 40e6, 100e6, 200e6, 400e6};

  // coverage_contour
  std::string variant = "position";  // "position" or "orientation"
  int grid_points = 81;
  double fixed_beta = -kPi / 4.0;

  void validate() const;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  Scene scene;
  SignalSpec signal;
  AdhocConfig adhoc;
  MlConfig ml;
  ExperimentSpec experiment;

  void validate() const;
};

/// Table II defaults with both incidence points.
ScenarioConfig default_config();

/// Throws ConfigError on unknown keys, duplicate unit spellings, wrong types
/// or invalid values. Missing keys keep their defaults.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ScenarioConfig& c);

/// FNV-1a over the canonical JSON dump.
std::uint64_t config_hash(const ScenarioConfig& c);

}  // namespace radloc
