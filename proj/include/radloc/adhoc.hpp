#pragma once

#include "radloc/fisher.hpp"
#include "radloc/geometry.hpp"
#include "radloc/measurement.hpp"

#include <vector>

namespace radloc {

struct AdhocConfig {
  double psi_grid_step = kPi / 200.0;
  /// One parabolic step on the squared objective around the best grid point.
  bool refine_psi = false;
  Exec exec = Exec::parallel;

  void validate() const;
};

struct HalfLineDistance {
  double distance = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
};

/// min ||(p1 + t1 d1) - (p2 + t2 d2)|| over t1, t2 >= 0, for unit d1, d2.
HalfLineDistance halfline_min_distance(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2);

/// Least-squares point closest to two full lines. Throws GeometryError for
/// parallel lines.
Vec3 closest_point_to_two_lines(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2);

/// A rotation taking d_a0 to -R_BS d_d0.
Rotation solve_rtilde(const Vec3& d_a0, const Rotation& r_bs, const Vec3& d_d0);

/// R(psi) = R_tilde Q_{d_a0}(psi).
Rotation rotation_family(const Rotation& r_tilde, const Vec3& d_a0, double psi);

/// ||delta(psi)||: stacked NLoS half-line distances in the frame scaled so
/// that the BS-UE distance is one.
double psi_objective(double psi, const MeasurementSet& meas, const Vec3& p_bs, const Rotation& r_bs);

struct RotationEstimate {
  Rotation r_ue;
  double psi = 0.0;
  double residual = 0.0;
};

RotationEstimate estimate_rotation(const MeasurementSet& meas, const Vec3& p_bs, const Rotation& r_bs,
                                   const AdhocConfig& config = {});

struct PositionEstimate {
  Vec3 p_ue = Vec3::Zero();
  std::vector<Vec3> ips;
  double rho0 = 0.0;
  bool negative_tdoa = false;  // some measured NLoS delay precedes the LoS one
};

PositionEstimate estimate_positions(const MeasurementSet& meas, const Rotation& r_ue, const Vec3& p_bs,
                                    const Rotation& r_bs, double propagation_speed = kSpeedOfLight);

double estimate_clock_bias(const MeasurementSet& meas, const Vec3& p_ue, const std::vector<Vec3>& ips,
                           const Vec3& p_bs, double propagation_speed = kSpeedOfLight);

struct AdhocEstimate {
  Rotation r_ue;
  Vec3 p_ue = Vec3::Zero();
  std::vector<Vec3> ips;
  double clock_bias = 0.0;
  double psi = 0.0;
  double residual = 0.0;
  double rho0 = 0.0;
  bool negative_tdoa = false;

  LocalizationState state() const { return LocalizationState{r_ue, p_ue, ips, clock_bias}; }
};

AdhocEstimate adhoc_estimate(const MeasurementSet& meas, const Vec3& p_bs, const Rotation& r_bs,
                             const AdhocConfig& config = {}, double propagation_speed = kSpeedOfLight);

}  // namespace radloc
