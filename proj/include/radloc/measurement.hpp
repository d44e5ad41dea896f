#pragma once

#include "radloc/fisher.hpp"
#include "radloc/geometry.hpp"
#include "radloc/rng.hpp"

namespace radloc {

/// Noisy channel parameters together with the likelihood they were drawn from.
struct MeasurementSet {
  ChannelParams measured;
  LikelihoodParams params;

  int num_paths() const { return static_cast<int>(measured.num_paths()); }
  int num_ips() const { return num_paths() - 1; }
};

/// One draw from the von Mises distribution centred on `mean`, returned in
/// (mean - pi, mean + pi]. Best-Fisher rejection sampling; kappa above 1e6
/// falls back to N(mean, 1/kappa), kappa = inf returns `mean`.
double sample_von_mises(Rng& rng, double mean, double kappa);

/// Independent von Mises angles and Gaussian delays around `truth`. Sampled
/// angle pairs are folded back onto the canonical ranges.
MeasurementSet sample_measurements(const ChannelParams& truth, const LikelihoodParams& params, Rng& rng);

MeasurementSet noise_free_measurements(const ChannelParams& truth, const LikelihoodParams& params);

}  // namespace radloc
