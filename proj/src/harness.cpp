#include "radloc/harness.hpp"

#include "radloc/errors.hpp"
#include "radloc/measurement.hpp"
#include "radloc/rng.hpp"
#include "radloc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#ifndef RADLOC_VERSION
#define RADLOC_VERSION "unknown"
#endif

namespace radloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rotation_error(const Rotation& a, const Rotation& b) { return (a.matrix() - b.matrix()).norm(); }

Vec3 uniform_in_box(Rng& rng, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 out;
  for (int i = 0; i < 3; ++i) out(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
  return out;
}

Rotation random_euler_rotation(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = kTwoPi * u(rng), b = kPi * u(rng), g = kTwoPi * u(rng);
  return euler_zyx_to_rotation(a, b, g);
}

SignalConfig with_beams(SignalConfig sig, Rng& rng) {
  draw_beams(sig, rng);
  return sig;
}

template <typename Fn>
void for_each_index(int n, Exec exec, Fn&& fn) {
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (int i = 0; i < n; ++i) fn(i);
}

std::vector<ResultRow> flatten(std::vector<std::vector<ResultRow>>& parts) {
  std::vector<ResultRow> out;
  for (auto& p : parts) out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  return out;
}

double rms(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double mean_finite(const std::vector<double>& v, int* infinite) {
  double acc = 0.0;
  int n = 0;
  *infinite = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      acc += x;
      ++n;
    } else {
      ++*infinite;
    }
  }
  return n > 0 ? acc / n : kInf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double db(double x) { return std::isfinite(x) ? 10.0 * std::log10(x) : kInf; }

void push_bounds(std::vector<ResultRow>& rows, const ResultRow& proto, const BoundsReport& b,
                 const std::string& suffix = {}) {
  const std::pair<const char*, double> items[] = {{"oeb", b.oeb}, {"peb", b.peb}, {"ipeb", b.ipeb}, {"seb", b.seb}};
  for (const auto& [name, value] : items) {
    ResultRow r = proto;
    r.metric = std::string(name) + suffix;
    r.value = value;
    rows.push_back(r);
  }
}

struct TrialOutcome {
  bool ok = false;
  BoundsReport full;
  BoundsReport independent;
  AdhocEstimate adhoc;
  MlEstimate ml;
};

// Beams, gain phases, likelihood parameters, measurements, then both
// estimators, all from one trial RNG in that order.
TrialOutcome estimation_trial(const Scene& scene, const SignalConfig& base, AdhocConfig adhoc_cfg,
                              const MlConfig& ml_cfg, Rng& rng) {
  TrialOutcome out;
  const SignalConfig sig = with_beams(base, rng);
  const PathGains gains = channel_gains(scene, sig.wavelength(), rng);
  try {
    const MatX j_eta = channel_efim(scene, gains, sig, Exec::serial);
    out.full = bounds_from_efim(scene, j_eta);
    BoundsOptions ind;
    ind.independent = true;
    out.independent = bounds_from_efim(scene, j_eta, ind);
    const LikelihoodParams lp = likelihood_params(j_eta);
    const MeasurementSet meas = sample_measurements(channel_params(scene), lp, rng);
    adhoc_cfg.exec = Exec::serial;
    out.adhoc = adhoc_estimate(meas, scene.p_bs, scene.r_bs, adhoc_cfg, scene.propagation_speed);
    out.ml = ml_estimate(out.adhoc.state(), meas, Anchor{scene.p_bs, scene.r_bs, scene.propagation_speed}, ml_cfg);
    out.ok = true;
  } catch (const std::exception&) {
    out.ok = false;
  }
  return out;
}

Scene randomized_scene(const Scene& base, const ExperimentSpec& e, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Scene s = base;
    s.r_ue = random_euler_rotation(rng);
    if (e.randomize == "full") {
      s.p_ue = uniform_in_box(rng, e.box_min, e.box_max);
      for (auto& ip : s.ips) ip = uniform_in_box(rng, e.box_min, e.box_max);
      s.reflection_coeffs.assign(s.ips.size(), kRandomIpReflection);
    } else {
      s.p_ue = uniform_in_box(rng, e.box_min, e.box_max);
      s.p_ue.z() = e.plane_height;
    }
    try {
      s.validate();
      return s;
    } catch (const std::exception&) {
    }
  }
  throw GeometryError("could not draw a valid random scene");
}

KnownParams known_from(const std::string& k) {
  KnownParams out;
  if (k == "rotation") out.rotation = true;
  if (k == "position") out.position = true;
  if (k == "ips") out.ips = true;
  if (k == "clock_bias") out.clock_bias = true;
  if (k == "all_but_clock_bias") out.rotation = out.position = out.ips = true;
  return out;
}

}  // namespace

std::vector<double> ExperimentResult::values(const std::string& metric, const std::string& sweep_var) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.metric == metric && (sweep_var.empty() || r.sweep_var == sweep_var)) out.push_back(r.value);
  }
  return out;
}

double ExperimentResult::summary_value(const std::string& metric, double sweep_value,
                                       const std::string& sweep_var) const {
  for (const auto& r : summary) {
    if (r.metric == metric && r.sweep_value == sweep_value && (sweep_var.empty() || r.sweep_var == sweep_var)) {
      return r.value;
    }
  }
  throw PreconditionError("no summary row for metric " + metric);
}

ExperimentResult run_rmse_vs_power(const ScenarioConfig& config, Exec exec) {
  config.validate();
  const auto& e = config.experiment;
  ExperimentResult res;
  res.name = "rmse_vs_power";
  const std::string var = "transmit_power_dbm";
  for (std::size_t pi = 0; pi < e.transmit_power_dbm.size(); ++pi) {
    const double p_dbm = e.transmit_power_dbm[pi];
    SignalSpec spec = config.signal;
    spec.transmit_power_dbm = p_dbm;
    const SignalConfig base = spec.build();

    std::vector<TrialOutcome> outcomes(e.trials);
    for_each_index(e.trials, exec, [&](int t) {
      Rng rng = derive_rng(config.seed, pi, static_cast<std::uint64_t>(t));
      outcomes[t] = estimation_trial(config.scene, base, config.adhoc, config.ml, rng);
    });

    std::vector<double> ap, ar, mp, mr, peb2, oeb2, pebi2, oebi2;
    int failures = 0;
    for (int t = 0; t < e.trials; ++t) {
      const TrialOutcome& o = outcomes[t];
      const ResultRow proto{var, p_dbm, t, "", 0.0};
      push_bounds(res.rows, proto, o.full);
      push_bounds(res.rows, proto, o.independent, "_ind");
      auto add = [&](const char* m, double v) {
        ResultRow r = proto;
        r.metric = m;
        r.value = v;
        res.rows.push_back(r);
      };
      add("failed", o.ok ? 0.0 : 1.0);
      peb2.push_back(o.full.peb * o.full.peb);
      oeb2.push_back(o.full.oeb * o.full.oeb);
      pebi2.push_back(o.independent.peb * o.independent.peb);
      oebi2.push_back(o.independent.oeb * o.independent.oeb);
      if (!o.ok) {
        ++failures;
        continue;
      }
      const Scene& s = config.scene;
      ap.push_back((o.adhoc.p_ue - s.p_ue).norm());
      ar.push_back(rotation_error(o.adhoc.r_ue, s.r_ue));
      mp.push_back((o.ml.p_ue - s.p_ue).norm());
      mr.push_back(rotation_error(o.ml.r_ue, s.r_ue));
      add("adhoc_position_error", ap.back());
      add("adhoc_rotation_error", ar.back());
      add("adhoc_clock_bias_error", std::abs(o.adhoc.clock_bias - s.clock_bias));
      add("ml_position_error", mp.back());
      add("ml_rotation_error", mr.back());
      add("ml_clock_bias_error", std::abs(o.ml.clock_bias - s.clock_bias));
      add("ml_iterations", o.ml.iterations);
    }
    int dummy = 0;
    auto sum = [&](const char* m, double v) { res.summary.push_back({var, p_dbm, -1, m, v}); };
    sum("rmse_adhoc_position", rms(ap));
    sum("rmse_adhoc_rotation", rms(ar));
    sum("rmse_ml_position", rms(mp));
    sum("rmse_ml_rotation", rms(mr));
    // Root-mean of the per-trial squared bounds, the quantity an RMSE is compared with.
    sum("peb", std::sqrt(mean_finite(peb2, &dummy)));
    sum("oeb", std::sqrt(mean_finite(oeb2, &dummy)));
    sum("peb_ind", std::sqrt(mean_finite(pebi2, &dummy)));
    sum("oeb_ind", std::sqrt(mean_finite(oebi2, &dummy)));
    sum("failures", failures);
    res.failures += failures;
  }
  return res;
}

ExperimentResult run_bound_cdf(const ScenarioConfig& config, Exec exec) {
  config.validate();
  const auto& e = config.experiment;
  ExperimentResult res;
  res.name = "bound_cdf";
  const std::string var = "num_ips";
  const double m = static_cast<double>(config.scene.num_ips());
  const SignalConfig base = config.signal.build();

  std::vector<std::string> variants = {"full", "ind"};
  for (const auto& k : e.known) {
    if (k != "none") variants.push_back("known_" + k);
  }

  std::vector<std::vector<ResultRow>> parts(e.trials);
  std::vector<int> failed(e.trials, 0);
  for_each_index(e.trials, exec, [&](int t) {
    Rng rng = derive_rng(config.seed, 0, static_cast<std::uint64_t>(t));
    const ResultRow proto{var, m, t, "", 0.0};
    try {
      const Scene s = randomized_scene(config.scene, e, rng);
      const SignalConfig sig = with_beams(base, rng);
      const PathGains gains = channel_gains(s, sig.wavelength(), rng);
      MatX j_eta;
      bool ok = true;
      try {
        j_eta = channel_efim(s, gains, sig, Exec::serial);
      } catch (const IdentifiabilityError&) {
        ok = false;
      }
      for (const auto& v : variants) {
        BoundsReport b;
        if (ok) {
          BoundsOptions opt;
          opt.independent = v == "ind";
          if (v.rfind("known_", 0) == 0) opt.known = known_from(v.substr(6));
          b = bounds_from_efim(s, j_eta, opt);
        }
        push_bounds(parts[t], proto, b, "_" + v);
      }
    } catch (const std::exception&) {
      failed[t] = 1;
    }
  });
  res.rows = flatten(parts);
  for (int f : failed) res.failures += f;

  for (const auto& v : variants) {
    for (const char* b : {"oeb", "peb", "ipeb", "seb"}) {
      const std::string metric = std::string(b) + "_" + v;
      std::vector<double> vals = res.values(metric);
      std::sort(vals.begin(), vals.end());
      for (std::size_t k = 0; k < vals.size(); ++k) {
        res.summary.push_back({var, m, static_cast<int>(k), metric + "_sorted", vals[k]});
      }
      if (!vals.empty()) res.summary.push_back({var, m, -1, metric + "_median", median(vals)});
    }
  }
  return res;
}

ExperimentResult run_parameter_sweep(const ScenarioConfig& config, Exec exec) {
  config.validate();
  const auto& e = config.experiment;
  ExperimentResult res;
  res.name = "parameter_sweep";
  const std::string var = e.axis == "bandwidth" ? "bandwidth_hz" : e.axis;

  for (std::size_t vi = 0; vi < e.values.size(); ++vi) {
    const double v = e.values[vi];
    SignalSpec spec = config.signal;
    Scene scene = config.scene;
    int random_ips = 0;
    if (e.axis == "bandwidth") {
      spec.num_subcarriers = std::max(1, static_cast<int>(std::lround(v / spec.subcarrier_spacing)));
    } else if (e.axis == "N_UE") {
      spec.ue_array_side = static_cast<int>(std::lround(std::sqrt(v)));
    } else if (e.axis == "N_BS") {
      spec.bs_array_side = static_cast<int>(std::lround(std::sqrt(v)));
    } else {
      random_ips = static_cast<int>(v);
    }
    const SignalConfig base = spec.build();

    std::vector<BoundsReport> bounds(e.trials);
    std::vector<int> failed(e.trials, 0);
    for_each_index(e.trials, exec, [&](int t) {
      Rng rng = derive_rng(config.seed, vi, static_cast<std::uint64_t>(t));
      try {
        Scene s = scene;
        if (random_ips > 0) {
          for (int attempt = 0;; ++attempt) {
            s.ips.resize(random_ips);
            for (auto& ip : s.ips) ip = uniform_in_box(rng, e.box_min, e.box_max);
            s.reflection_coeffs.assign(random_ips, kRandomIpReflection);
            try {
              s.validate();
              break;
            } catch (const std::exception&) {
              if (attempt > 100) throw;
            }
          }
        }
        const SignalConfig sig = with_beams(base, rng);
        const PathGains gains = channel_gains(s, sig.wavelength(), rng);
        BoundsOptions opt;
        opt.exec = Exec::serial;
        bounds[t] = compute_bounds(s, gains, sig, opt);
      } catch (const std::exception&) {
        failed[t] = 1;
      }
    });

    std::vector<double> per[4];
    for (int t = 0; t < e.trials; ++t) {
      res.failures += failed[t];
      push_bounds(res.rows, ResultRow{var, v, t, "", 0.0}, bounds[t]);
      per[0].push_back(bounds[t].oeb);
      per[1].push_back(bounds[t].peb);
      per[2].push_back(bounds[t].ipeb);
      per[3].push_back(bounds[t].seb);
    }
    const char* names[4] = {"oeb", "peb", "ipeb", "seb"};
    int infinite = 0;
    for (int k = 0; k < 4; ++k) {
      const double mean = mean_finite(per[k], &infinite);
      res.summary.push_back({var, v, -1, std::string("mean_") + names[k], mean});
      res.summary.push_back({var, v, -1, std::string("median_") + names[k], median(per[k])});
    }
    res.summary.push_back({var, v, -1, "infinite_trials", static_cast<double>(infinite)});
  }
  return res;
}

ExperimentResult run_coverage_contour(const ScenarioConfig& config, Exec exec) {
  config.validate();
  const auto& e = config.experiment;
  ExperimentResult res;
  res.name = "coverage_contour";
  const int n = e.grid_points;
  const bool orientation = e.variant == "orientation";
  Rng beam_rng = derive_rng(config.seed, 0, 0);
  const SignalConfig sig = with_beams(config.signal.build(), beam_rng);
  const char* axis_a = orientation ? "alpha_rad" : "x_m";
  const char* axis_b = orientation ? "gamma_rad" : "y_m";

  std::vector<std::vector<ResultRow>> parts(n * n);
  for_each_index(n * n, exec, [&](int cell) {
    const int i = cell / n, j = cell % n;
    Scene s = config.scene;
    double a, b;
    if (orientation) {
      a = kTwoPi * i / (n - 1);
      b = kTwoPi * j / (n - 1);
      s.r_ue = euler_zyx_to_rotation(a, e.fixed_beta, b);
    } else {
      a = e.box_min.x() + (e.box_max.x() - e.box_min.x()) * i / (n - 1);
      b = e.box_min.y() + (e.box_max.y() - e.box_min.y()) * j / (n - 1);
      s.p_ue = Vec3(a, b, e.plane_height);
    }
    BoundsReport bounds;
    try {
      s.validate();
      Rng rng = derive_rng(config.seed, 1, static_cast<std::uint64_t>(cell));
      const PathGains gains = channel_gains(s, sig.wavelength(), rng);
      BoundsOptions opt;
      opt.exec = Exec::serial;
      bounds = compute_bounds(s, gains, sig, opt);
    } catch (const std::exception&) {
      // Degenerate cell (UE on the BS or an IP): reported as infinite.
    }
    const ResultRow proto{"cell", static_cast<double>(cell), 0, "", 0.0};
    auto add = [&](const char* m, double v) {
      ResultRow r = proto;
      r.metric = m;
      r.value = v;
      parts[cell].push_back(r);
    };
    add(axis_a, a);
    add(axis_b, b);
    add("oeb_db", db(bounds.oeb));
    add("peb_db", db(bounds.peb));
  });
  res.rows = flatten(parts);
  int infinite = 0;
  for (double v : res.values("peb_db")) infinite += std::isfinite(v) ? 0 : 1;
  const double m = static_cast<double>(config.scene.num_ips());
  res.summary.push_back({"num_ips", m, -1, "grid_points", static_cast<double>(n)});
  res.summary.push_back({"num_ips", m, -1, "infinite_cells", static_cast<double>(infinite)});
  return res;
}

ExperimentResult run_experiment(const ScenarioConfig& config, Exec exec) {
  const std::string& name = config.experiment.name;
  if (name == "rmse_vs_power") return run_rmse_vs_power(config, exec);
  if (name == "bound_cdf") return run_bound_cdf(config, exec);
  if (name == "parameter_sweep") return run_parameter_sweep(config, exec);
  if (name == "coverage_contour") return run_coverage_contour(config, exec);
  throw ConfigError("unknown experiment '" + name + "'");
}

BoundsReport scenario_bounds(const ScenarioConfig& config, const BoundsOptions& options) {
  config.validate();
  Rng rng = derive_rng(config.seed, 0, 0);
  const SignalConfig sig = with_beams(config.signal.build(), rng);
  const PathGains gains = channel_gains(config.scene, sig.wavelength(), rng);
  return compute_bounds(config.scene, gains, sig, options);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.sweep_var << ',' << format_number(r.sweep_value) << ',' << r.trial << ',' << r.metric << ','
        << format_number(r.value) << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, rows);
}

std::string library_version() { return RADLOC_VERSION; }

void write_manifest(const std::string& path, const RunManifest& m) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(m.config_hash));
  const nlohmann::json j{{"experiment", m.experiment},     {"seed", m.seed},
                         {"config_hash", hash},            {"version", library_version()},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                       "." + std::to_string(EIGEN_MINOR_VERSION)},
                         {"threads", m.threads},           {"failures", m.failures},
                         {"outputs", m.outputs}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace radloc
