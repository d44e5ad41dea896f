#include "radloc/config.hpp"

#include "radloc/errors.hpp"
#include "radloc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace radloc {

using nlohmann::json;

SignalConfig SignalSpec::build() const {
  SignalConfig c;
  c.carrier_frequency = carrier_frequency;
  c.subcarrier_spacing = subcarrier_spacing;
  c.num_subcarriers = num_subcarriers;
  c.num_symbols = num_symbols;
  c.transmit_power = dbm_to_watts(transmit_power_dbm);
  c.noise_psd = dbm_to_watts(noise_psd_dbm_per_hz);
  c.noise_figure = db_to_linear(noise_figure_db);
  set_arrays(c, bs_array_side, ue_array_side);
  return c;
}

namespace {

const std::set<std::string> kExperiments = {"rmse_vs_power", "bound_cdf", "parameter_sweep", "coverage_contour"};
const std::set<std::string> kKnown = {"none", "rotation", "position", "ips", "clock_bias", "all_but_clock_bias"};

bool is_square(double v) {
  if (!(v >= 1.0) || v != std::floor(v)) return false;
  const double s = std::round(std::sqrt(v));
  return s * s == v;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (!kExperiments.count(name)) throw ConfigError("experiment.name: unknown experiment '" + name + "'");
  if (trials < 1) throw ConfigError("experiment.trials must be at least 1");
  if (transmit_power_dbm.empty()) throw ConfigError("experiment.transmit_power_dbm must not be empty");
  if (randomize != "full" && randomize != "ue_plane") {
    throw ConfigError("experiment.randomize must be 'full' or 'ue_plane'");
  }
  if (known.empty()) throw ConfigError("experiment.known must not be empty");
  for (const auto& k : known) {
    if (!kKnown.count(k)) throw ConfigError("experiment.known: unknown entry '" + k + "'");
  }
  if (!(box_max.array() > box_min.array()).all()) throw ConfigError("experiment box must have positive extent");
  if (values.empty()) throw ConfigError("experiment.values must not be empty");
  for (double v : values) {
    if (axis == "bandwidth") {
      if (!(v > 0.0)) throw ConfigError("bandwidth values must be positive");
    } else if (axis == "N_UE" || axis == "N_BS") {
      if (!is_square(v)) throw ConfigError("antenna counts must be perfect squares (square arrays)");
    } else if (axis == "num_IPs") {
      if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("num_IPs values must be integers >= 1");
    } else {
      throw ConfigError("experiment.axis must be one of bandwidth, N_UE, N_BS, num_IPs");
    }
  }
  if (variant != "position" && variant != "orientation") {
    throw ConfigError("experiment.variant must be 'position' or 'orientation'");
  }
  if (grid_points < 2) throw ConfigError("experiment.grid_points must be at least 2");
}

void ScenarioConfig::validate() const {
  try {
    scene.validate();
    SignalConfig sc = signal.build();
    Rng rng(0);
    draw_beams(sc, rng);
    sc.validate();
    adhoc.validate();
    ml.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (scene.num_ips() < 1) throw ConfigError("scene needs at least one incidence point");
  experiment.validate();
}

ScenarioConfig default_config() {
  ScenarioConfig c;
  c.scene = default_scene(2);
  return c;
}

namespace {

// Tracks which keys of one JSON object were consumed so leftovers can be
// reported.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    return true;
  }

  const json& at(const std::string& key) const { return j_.at(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key) + ": wrong type");
    }
  }

  /// At most one of several unit spellings may be present.
  int pick(std::initializer_list<std::string> keys) {
    int found = -1, idx = 0;
    for (const auto& k : keys) {
      if (has(k)) {
        if (found >= 0) throw ConfigError(name_ + ": the same quantity is given in more than one unit");
        found = idx;
      }
      ++idx;
    }
    return found;
  }

  double number(const std::string& key) {
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    return v.get<double>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

Vec3 vec3(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(what + ": expected an array of 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ConfigError(what + ": expected an array of 3 numbers");
    out(i) = v[i].get<double>();
  }
  return out;
}

json to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

json to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

Rotation rotation_from(Section& s, const std::string& prefix, const Rotation& fallback) {
  const int which = s.pick({prefix + "_euler_zyx_rad", prefix + "_matrix", prefix});
  if (which < 0) return fallback;
  try {
    if (which == 0) {
      const Vec3 e = vec3(s.at(prefix + "_euler_zyx_rad"), s.path(prefix + "_euler_zyx_rad"));
      return euler_zyx_to_rotation(e(0), e(1), e(2));
    }
    if (which == 1) {
      const json& rows = s.at(prefix + "_matrix");
      if (!rows.is_array() || rows.size() != 3) throw ConfigError(s.path(prefix + "_matrix") + ": expected 3 rows");
      Mat3 m;
      for (int r = 0; r < 3; ++r) m.row(r) = vec3(rows[r], s.path(prefix + "_matrix")).transpose();
      return Rotation::from_matrix(m, 1e-9);
    }
    const json& name = s.at(prefix);
    if (name == "R1") return orientation_r1();
    if (name == "R2") return orientation_r2();
    throw ConfigError(s.path(prefix) + ": expected \"R1\" or \"R2\"");
  } catch (const PreconditionError& e) {
    throw ConfigError(s.path(prefix) + ": " + e.what());
  }
}

void read_scene(const json& j, Scene& scene) {
  Section s(j, "scene");
  if (s.has("bs_position_m")) scene.p_bs = vec3(s.at("bs_position_m"), s.path("bs_position_m"));
  scene.r_bs = rotation_from(s, "bs_orientation", scene.r_bs);
  if (s.has("ue_position_m")) scene.p_ue = vec3(s.at("ue_position_m"), s.path("ue_position_m"));
  scene.r_ue = rotation_from(s, "ue_orientation", scene.r_ue);
  if (s.has("ips_m")) {
    const json& a = s.at("ips_m");
    if (!a.is_array()) throw ConfigError("scene.ips_m: expected an array of points");
    scene.ips.clear();
    for (const auto& p : a) scene.ips.push_back(vec3(p, "scene.ips_m"));
    scene.reflection_coeffs.assign(scene.ips.size(), kRandomIpReflection);
  }
  s.get("reflection_coefficients", scene.reflection_coeffs);
  switch (s.pick({"clock_bias_s", "clock_bias_ns"})) {
    case 0: scene.clock_bias = s.number("clock_bias_s"); break;
    case 1: scene.clock_bias = 1e-9 * s.number("clock_bias_ns"); break;
    default: break;
  }
  if (s.has("propagation_speed_m_per_s")) scene.propagation_speed = s.number("propagation_speed_m_per_s");
  s.finish();
}

void read_signal(const json& j, SignalSpec& sig) {
  Section s(j, "signal");
  if (s.has("carrier_frequency_hz")) sig.carrier_frequency = s.number("carrier_frequency_hz");
  if (s.has("subcarrier_spacing_hz")) sig.subcarrier_spacing = s.number("subcarrier_spacing_hz");
  s.get("num_subcarriers", sig.num_subcarriers);
  s.get("num_symbols", sig.num_symbols);
  switch (s.pick({"transmit_power_dbm", "transmit_power_w"})) {
    case 0: sig.transmit_power_dbm = s.number("transmit_power_dbm"); break;
    case 1: {
      const double w = s.number("transmit_power_w");
      if (!(w > 0.0)) throw ConfigError("signal.transmit_power_w must be positive");
      sig.transmit_power_dbm = 10.0 * std::log10(w / 1e-3);
      break;
    }
    default: break;
  }
  switch (s.pick({"noise_psd_dbm_per_hz", "noise_psd_w_per_hz"})) {
    case 0: sig.noise_psd_dbm_per_hz = s.number("noise_psd_dbm_per_hz"); break;
    case 1: {
      const double w = s.number("noise_psd_w_per_hz");
      if (!(w > 0.0)) throw ConfigError("signal.noise_psd_w_per_hz must be positive");
      sig.noise_psd_dbm_per_hz = 10.0 * std::log10(w / 1e-3);
      break;
    }
    default: break;
  }
  switch (s.pick({"noise_figure_db", "noise_figure_linear"})) {
    case 0: sig.noise_figure_db = s.number("noise_figure_db"); break;
    case 1: {
      const double l = s.number("noise_figure_linear");
      if (!(l > 0.0)) throw ConfigError("signal.noise_figure_linear must be positive");
      sig.noise_figure_db = 10.0 * std::log10(l);
      break;
    }
    default: break;
  }
  s.get("bs_array_side", sig.bs_array_side);
  s.get("ue_array_side", sig.ue_array_side);
  s.finish();
}

void read_adhoc(const json& j, AdhocConfig& a) {
  Section s(j, "adhoc");
  if (s.has("psi_grid_step_rad")) a.psi_grid_step = s.number("psi_grid_step_rad");
  s.get("refine_psi", a.refine_psi);
  s.finish();
}

void read_ml(const json& j, MlConfig& m) {
  Section s(j, "ml");
  s.get("max_outer_iters", m.max_outer_iters);
  s.get("nll_rel_tol", m.nll_rel_tol);
  s.get("initial_step", m.initial_step);
  s.get("shrink", m.shrink);
  s.get("sufficient_decrease", m.sufficient_decrease);
  s.get("euclidean_inner_iters", m.euclidean_inner_iters);
  s.finish();
}

void read_experiment(const json& j, ExperimentSpec& e) {
  Section s(j, "experiment");
  s.get("name", e.name);
  s.get("trials", e.trials);
  s.get("transmit_power_dbm", e.transmit_power_dbm);
  s.get("randomize", e.randomize);
  s.get("known", e.known);
  if (s.has("box_min_m")) e.box_min = vec3(s.at("box_min_m"), s.path("box_min_m"));
  if (s.has("box_max_m")) e.box_max = vec3(s.at("box_max_m"), s.path("box_max_m"));
  if (s.has("plane_height_m")) e.plane_height = s.number("plane_height_m");
  s.get("axis", e.axis);
  s.get("values", e.values);
  s.get("variant", e.variant);
  s.get("grid_points", e.grid_points);
  if (s.has("fixed_beta_rad")) e.fixed_beta = s.number("fixed_beta_rad");
  s.finish();
}

}  // namespace

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c = default_config();
  Section top(j, "config");
  if (top.has("seed")) {
    const json& v = top.at("seed");
    if (!v.is_number_unsigned()) throw ConfigError("config.seed: expected a nonnegative integer");
    c.seed = v.get<std::uint64_t>();
  }
  if (top.has("scene")) read_scene(top.at("scene"), c.scene);
  if (top.has("signal")) read_signal(top.at("signal"), c.signal);
  if (top.has("adhoc")) read_adhoc(top.at("adhoc"), c.adhoc);
  if (top.has("ml")) read_ml(top.at("ml"), c.ml);
  if (top.has("experiment")) read_experiment(top.at("experiment"), c.experiment);
  top.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ScenarioConfig& c) {
  json ips = json::array();
  for (const auto& p : c.scene.ips) ips.push_back(to_json(p));
  const auto& e = c.experiment;
  return json{
      {"seed", c.seed},
      {"scene",
       {{"bs_position_m", to_json(c.scene.p_bs)},
        {"bs_orientation_matrix", to_json(c.scene.r_bs.matrix())},
        {"ue_position_m", to_json(c.scene.p_ue)},
        {"ue_orientation_matrix", to_json(c.scene.r_ue.matrix())},
        {"ips_m", ips},
        {"reflection_coefficients", c.scene.reflection_coeffs},
        {"clock_bias_s", c.scene.clock_bias},
        {"propagation_speed_m_per_s", c.scene.propagation_speed}}},
      {"signal",
       {{"carrier_frequency_hz", c.signal.carrier_frequency},
        {"subcarrier_spacing_hz", c.signal.subcarrier_spacing},
        {"num_subcarriers", c.signal.num_subcarriers},
        {"num_symbols", c.signal.num_symbols},
        {"transmit_power_dbm", c.signal.transmit_power_dbm},
        {"noise_psd_dbm_per_hz", c.signal.noise_psd_dbm_per_hz},
        {"noise_figure_db", c.signal.noise_figure_db},
        {"bs_array_side", c.signal.bs_array_side},
        {"ue_array_side", c.signal.ue_array_side}}},
      {"adhoc", {{"psi_grid_step_rad", c.adhoc.psi_grid_step}, {"refine_psi", c.adhoc.refine_psi}}},
      {"ml",
       {{"max_outer_iters", c.ml.max_outer_iters},
        {"nll_rel_tol", c.ml.nll_rel_tol},
        {"initial_step", c.ml.initial_step},
        {"shrink", c.ml.shrink},
        {"sufficient_decrease", c.ml.sufficient_decrease},
        {"euclidean_inner_iters", c.ml.euclidean_inner_iters}}},
      {"experiment",
       {{"name", e.name},
        {"trials", e.trials},
        {"transmit_power_dbm", e.transmit_power_dbm},
        {"randomize", e.randomize},
        {"known", e.known},
        {"box_min_m", to_json(e.box_min)},
        {"box_max_m", to_json(e.box_max)},
        {"plane_height_m", e.plane_height},
        {"axis", e.axis},
        {"values", e.values},
        {"variant", e.variant},
        {"grid_points", e.grid_points},
        {"fixed_beta_rad", e.fixed_beta}}},
  };
}

std::uint64_t config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace radloc
