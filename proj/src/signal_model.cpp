#include "radloc/signal_model.hpp"

#include "radloc/errors.hpp"

#include <cmath>
#include <random>

namespace radloc {

ArrayGeometry upa_geometry(int side, double spacing) {
  if (side < 1) throw PreconditionError("array side must be >= 1");
  ArrayGeometry g;
  g.displacements.resize(3, side * side);
  const double centre = (side + 1) / 2.0;
  for (int i = 1; i <= side; ++i) {
    for (int j = 1; j <= side; ++j) {
      g.displacements.col((i - 1) * side + j - 1) =
          Vec3(j - centre, -i + centre, 0.0) * spacing;
    }
  }
  return g;
}

CVecX array_response(const ArrayGeometry& geometry, const SphericalAngles& angles, double wavelength) {
  const Vec3 d = direction_from_angles(angles);
  const double k = kTwoPi / wavelength;
  const Eigen::VectorXd phase = k * (geometry.displacements.transpose() * d);
  CVecX a(phase.size());
  for (Eigen::Index n = 0; n < phase.size(); ++n) a(n) = std::polar(1.0, phase(n));
  return a;
}

void SignalConfig::validate() const {
  if (!(carrier_frequency > 0 && subcarrier_spacing > 0 && transmit_power > 0 && noise_psd > 0 &&
        noise_figure > 0 && propagation_speed > 0)) {
    throw PreconditionError("signal parameters must be positive");
  }
  if (num_subcarriers < 1 || num_symbols < 1) throw PreconditionError("N_f and K must be >= 1");
  if (bs_array.size() < 1 || ue_array.size() < 1) throw PreconditionError("arrays are empty");
  if (static_cast<int>(precoders.size()) != num_symbols ||
      static_cast<int>(combiners.size()) != num_symbols) {
    throw PreconditionError("need one precoder and one combiner per symbol");
  }
  for (int k = 0; k < num_symbols; ++k) {
    if (precoders[k].size() != bs_array.size() || combiners[k].size() != ue_array.size()) {
      throw PreconditionError("beam length does not match the array size");
    }
    if (std::abs(precoders[k].norm() - 1.0) > 1e-12 || std::abs(combiners[k].norm() - 1.0) > 1e-12) {
      throw PreconditionError("beams must have unit norm");
    }
  }
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::vector<CVecX> random_beams(Rng& rng, int n, int k) {
  if (n < 1 || k < 0) throw PreconditionError("random_beams needs N >= 1 and K >= 0");
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  const double amp = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<CVecX> beams(k, CVecX(n));
  for (auto& b : beams) {
    for (int i = 0; i < n; ++i) b(i) = std::polar(amp, phase(rng));
  }
  return beams;
}

void set_arrays(SignalConfig& config, int bs_side, int ue_side) {
  const double spacing = config.wavelength() / 2.0;
  config.bs_array = upa_geometry(bs_side, spacing);
  config.ue_array = upa_geometry(ue_side, spacing);
}

void draw_beams(SignalConfig& config, Rng& rng) {
  config.precoders = random_beams(rng, config.bs_array.size(), config.num_symbols);
  config.combiners = random_beams(rng, config.ue_array.size(), config.num_symbols);
}

double channel_gain_power(const Scene& scene, std::size_t m, double wavelength) {
  const Vec3 da = arrival_direction(scene, m);
  const Vec3 dd = departure_direction(scene, m);
  // cos(el) is the z component of the local direction.
  const double pattern = da.z() * da.z() * dd.z() * dd.z();
  double length;
  double gamma = 1.0;
  if (m == 0) {
    length = (scene.p_bs - scene.p_ue).norm();
  } else {
    const Vec3& ip = scene.ips[m - 1];
    length = (scene.p_bs - ip).norm() + (scene.p_ue - ip).norm();
    gamma = scene.reflection_coeffs.at(m - 1);
  }
  const double fourpi = 2.0 * kTwoPi;
  return wavelength * wavelength * gamma * pattern / (fourpi * fourpi * length * length);
}

cdouble channel_gain(const Scene& scene, std::size_t m, double wavelength, Rng& rng) {
  const double mag = std::sqrt(channel_gain_power(scene, m, wavelength));
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  return std::polar(mag, phase(rng));
}

PathGains channel_gains(const Scene& scene, double wavelength, Rng& rng) {
  PathGains h(scene.num_paths());
  for (std::size_t m = 0; m < h.size(); ++m) h[m] = channel_gain(scene, m, wavelength, rng);
  return h;
}

namespace {

void check_indices(const SignalConfig& config, int k, int n) {
  if (k < 1 || k > config.num_symbols || n < 1 || n > config.num_subcarriers) {
    throw PreconditionError("symbol or subcarrier index out of range");
  }
}

// w_k^H a_UE(aoa) a_BS^T(aod) f_k * sqrt(Es) * h_m for every path at symbol k.
std::vector<cdouble> beam_terms(const ChannelParams& params, const PathGains& gains,
                                const SignalConfig& config, int k) {
  const double lambda = config.wavelength();
  const double amp = std::sqrt(config.symbol_energy());
  std::vector<cdouble> out(params.num_paths());
  for (std::size_t m = 0; m < params.num_paths(); ++m) {
    const CVecX a_ue = array_response(config.ue_array, params.paths[m].aoa, lambda);
    const CVecX a_bs = array_response(config.bs_array, params.paths[m].aod, lambda);
    const cdouble rx = config.combiners[k - 1].dot(a_ue);  // w^H a
    const cdouble tx = a_bs.transpose() * config.precoders[k - 1];
    out[m] = amp * gains.at(m) * rx * tx;
  }
  return out;
}

}  // namespace

cdouble noise_free_symbol(const ChannelParams& params, const PathGains& gains,
                          const SignalConfig& config, int k, int n) {
  check_indices(config, k, n);
  if (gains.size() != params.num_paths()) throw PreconditionError("one gain per path required");
  const auto terms = beam_terms(params, gains, config, k);
  cdouble y = 0.0;
  for (std::size_t m = 0; m < terms.size(); ++m) {
    y += terms[m] * std::polar(1.0, -kTwoPi * (n - 1) * config.subcarrier_spacing * params.paths[m].toa);
  }
  return y;
}

cdouble noise_free_symbol(const Scene& scene, const PathGains& gains, const SignalConfig& config,
                          int k, int n) {
  return noise_free_symbol(channel_params(scene), gains, config, k, n);
}

Eigen::MatrixXcd noise_free_observation(const ChannelParams& params, const PathGains& gains,
                                        const SignalConfig& config) {
  if (gains.size() != params.num_paths()) throw PreconditionError("one gain per path required");
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(config.num_symbols, config.num_subcarriers);
  for (int k = 1; k <= config.num_symbols; ++k) {
    const auto terms = beam_terms(params, gains, config, k);
    for (std::size_t m = 0; m < terms.size(); ++m) {
      const double w = -kTwoPi * config.subcarrier_spacing * params.paths[m].toa;
      for (int n = 0; n < config.num_subcarriers; ++n) y(k - 1, n) += terms[m] * std::polar(1.0, w * n);
    }
  }
  return y;
}

}  // namespace radloc
