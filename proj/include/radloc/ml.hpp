#pragma once

#include "radloc/geometry.hpp"
#include "radloc/measurement.hpp"

#include <vector>

namespace radloc {

/// Known BS pose and the propagation speed.
struct Anchor {
  Vec3 p_bs = Vec3::Zero();
  Rotation r_bs;
  double propagation_speed = kSpeedOfLight;

  Scene scene(const LocalizationState& s) const;
};

struct MlConfig {
  int max_outer_iters = 200;
  double nll_rel_tol = 1e-9;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int euclidean_inner_iters = 25;

  void validate() const;
};

struct MlEstimate {
  Rotation r_ue;
  Vec3 p_ue = Vec3::Zero();
  std::vector<Vec3> ips;
  double clock_bias = 0.0;
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> nll_trace;  // entry 0 is the initial value

  LocalizationState state() const { return LocalizationState{r_ue, p_ue, ips, clock_bias}; }
};

/// 1/2 sum (toa_hat - toa)^2 / var - sum kappa cos(angle_hat - angle).
double nll(const LocalizationState& s, const MeasurementSet& meas, const Anchor& anchor);

struct NllGradients {
  Mat3 rotation;  // Euclidean dL/dR
  VecX zeta;      // [p_UE, p_1..p_M, b]
};

NllGradients nll_gradients(const LocalizationState& s, const MeasurementSet& meas, const Anchor& anchor);

/// X (X^T U - U^T X) / 2.
Mat3 so3_project(const Rotation& x, const Mat3& u);
/// (X + U)(I + U^T U)^{-1/2}; U must be tangent at X.
Rotation so3_retract(const Rotation& x, const Mat3& u);
Rotation riemannian_step(const Rotation& r, const Mat3& grad, double step);

MlEstimate ml_estimate(const LocalizationState& init, const MeasurementSet& meas, const Anchor& anchor,
                       const MlConfig& config = {});

}  // namespace radloc
