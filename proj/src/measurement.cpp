#include "radloc/measurement.hpp"

#include "radloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace radloc {

double sample_von_mises(Rng& rng, double mean, double kappa) {
  if (!(kappa >= 0.0)) throw PreconditionError("von Mises concentration must be nonnegative");
  if (std::isinf(kappa)) return mean;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (kappa < 1e-8) return mean + kPi * (2.0 * uni(rng) - 1.0);
  if (kappa > 1e6) {
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(kappa));
    return mean + std::remainder(gauss(rng), kTwoPi);
  }
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double u1 = uni(rng), u2 = uni(rng), u3 = uni(rng);
    const double z = std::cos(kPi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double theta = std::acos(std::clamp(f, -1.0, 1.0));
      return u3 > 0.5 ? mean + theta : mean - theta;
    }
  }
}

namespace {

void check_dims(const ChannelParams& truth, const LikelihoodParams& params) {
  const auto p = static_cast<Eigen::Index>(truth.num_paths());
  if (p == 0 || params.kappa_aoa.size() != 2 * p || params.kappa_aod.size() != 2 * p ||
      params.toa_variance.size() != p) {
    throw PreconditionError("likelihood parameters do not match the number of paths");
  }
  if ((params.kappa_aoa.array() < 0).any() || (params.kappa_aod.array() < 0).any() ||
      (params.toa_variance.array() < 0).any()) {
    throw PreconditionError("negative concentration or variance");
  }
}

}  // namespace

MeasurementSet sample_measurements(const ChannelParams& truth, const LikelihoodParams& params, Rng& rng) {
  check_dims(truth, params);
  MeasurementSet out{truth, params};
  for (std::size_t m = 0; m < truth.num_paths(); ++m) {
    const auto& t = truth.paths[m];
    auto& o = out.measured.paths[m];
    const double aoa_az = sample_von_mises(rng, t.aoa.azimuth, params.kappa_aoa(2 * m));
    const double aoa_el = sample_von_mises(rng, t.aoa.elevation, params.kappa_aoa(2 * m + 1));
    const double aod_az = sample_von_mises(rng, t.aod.azimuth, params.kappa_aod(2 * m));
    const double aod_el = sample_von_mises(rng, t.aod.elevation, params.kappa_aod(2 * m + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double delay = t.toa + std::sqrt(params.toa_variance(m)) * gauss(rng);
    o.aoa = SphericalAngles::canonical(aoa_az, aoa_el);
    o.aod = SphericalAngles::canonical(aod_az, aod_el);
    o.toa = delay;
  }
  return out;
}

MeasurementSet noise_free_measurements(const ChannelParams& truth, const LikelihoodParams& params) {
  check_dims(truth, params);
  return MeasurementSet{truth, params};
}

}  // namespace radloc
