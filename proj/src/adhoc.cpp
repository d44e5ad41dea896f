#include "radloc/adhoc.hpp"

#include "radloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace radloc {

void AdhocConfig::validate() const {
  if (!(psi_grid_step > 0.0 && psi_grid_step <= kPi / 8.0)) {
    throw PreconditionError("psi grid step must lie in (0, pi/8]");
  }
}

HalfLineDistance halfline_min_distance(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2) {
  const Vec3 w = p1 - p2;
  const double a = d1.dot(d2);
  const double b1 = d1.dot(w), b2 = d2.dot(w);
  auto dist = [&](double t1, double t2) { return (w + t1 * d1 - t2 * d2).norm(); };

  const double det = 1.0 - a * a;
  if (det > 1e-12) {
    const double t1 = (a * b2 - b1) / det;
    const double t2 = (b2 - a * b1) / det;
    if (t1 >= 0.0 && t2 >= 0.0) return {dist(t1, t2), t1, t2};
  }
  // The objective is convex, so the constrained optimum lies on t1 = 0 or t2 = 0.
  const double t2_edge = std::max(0.0, b2);
  const double t1_edge = std::max(0.0, -b1);
  const double on_t1_zero = dist(0.0, t2_edge);
  const double on_t2_zero = dist(t1_edge, 0.0);
  if (on_t1_zero <= on_t2_zero) return {on_t1_zero, 0.0, t2_edge};
  return {on_t2_zero, t1_edge, 0.0};
}

Vec3 closest_point_to_two_lines(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2) {
  if (d1.cross(d2).norm() < 1e-12) throw GeometryError("lines are parallel");
  const Mat3 q1 = Mat3::Identity() - d1 * d1.transpose();
  const Mat3 q2 = Mat3::Identity() - d2 * d2.transpose();
  return (q1 + q2).ldlt().solve(q1 * p1 + q2 * p2);
}

Rotation solve_rtilde(const Vec3& d_a0, const Rotation& r_bs, const Vec3& d_d0) {
  const Vec3 target = -(r_bs * d_d0);
  const double den = 1.0 - d_a0.dot(r_bs * d_d0);
  if (den > 1e-6) {
    const Mat3 s = skew(-d_a0.cross(r_bs * d_d0));
    return Rotation::from_matrix(Mat3::Identity() + s + s * s / den, 1e-9);
  }
  // d_a0 (nearly) equals R_BS d_d0: turn d_a0 around by pi first, then close
  // the remaining small gap with the well-conditioned formula.
  Vec3 e = Vec3::UnitX();
  if (std::abs(d_a0.dot(e)) > 0.9) e = Vec3::UnitY();
  const Rotation flip = axis_angle_rotation(d_a0.cross(e).normalized(), kPi);
  const Vec3 a = flip * d_a0;
  const Mat3 s = skew(a.cross(target));
  const Rotation close = Rotation::from_matrix(Mat3::Identity() + s + s * s / (1.0 + a.dot(target)), 1e-9);
  return close * flip;
}

Rotation rotation_family(const Rotation& r_tilde, const Vec3& d_a0, double psi) {
  return r_tilde * axis_angle_rotation(d_a0, psi);
}

namespace {

// Everything in the psi objective that does not depend on psi.
struct PsiProblem {
  Vec3 d_a0;
  Rotation r_tilde;
  Vec3 p_bs;
  Vec3 p_ue_scaled;
  std::vector<Vec3> bs_dirs;  // R_BS d_D,m, global
  std::vector<Vec3> ue_dirs;  // d_A,m, local

  PsiProblem(const MeasurementSet& meas, const Vec3& pbs, const Rotation& r_bs) : p_bs(pbs) {
    if (meas.num_ips() < 1) throw PreconditionError("rotation estimation needs at least one NLoS path");
    const auto& paths = meas.measured.paths;
    d_a0 = direction_from_angles(paths[0].aoa);
    const Vec3 d_d0 = direction_from_angles(paths[0].aod);
    r_tilde = solve_rtilde(d_a0, r_bs, d_d0);
    p_ue_scaled = p_bs + r_bs * d_d0;
    for (std::size_t m = 1; m < paths.size(); ++m) {
      bs_dirs.push_back(r_bs * direction_from_angles(paths[m].aod));
      ue_dirs.push_back(direction_from_angles(paths[m].aoa));
    }
  }

  Rotation rotation(double psi) const { return rotation_family(r_tilde, d_a0, psi); }

  double squared(double psi) const {
    const Rotation r = rotation(psi);
    double acc = 0.0;
    for (std::size_t m = 0; m < bs_dirs.size(); ++m) {
      const double d = halfline_min_distance(p_bs, bs_dirs[m], p_ue_scaled, r * ue_dirs[m]).distance;
      acc += d * d;
    }
    return acc;
  }
};

}  // namespace

double psi_objective(double psi, const MeasurementSet& meas, const Vec3& p_bs, const Rotation& r_bs) {
  return std::sqrt(PsiProblem(meas, p_bs, r_bs).squared(psi));
}

RotationEstimate estimate_rotation(const MeasurementSet& meas, const Vec3& p_bs, const Rotation& r_bs,
                                   const AdhocConfig& config) {
  config.validate();
  const PsiProblem prob(meas, p_bs, r_bs);
  const int n = static_cast<int>(std::ceil(kTwoPi / config.psi_grid_step - 1e-9));
  std::vector<double> values(n);
#pragma omp parallel for schedule(static) if (config.exec == Exec::parallel)
  for (int i = 0; i < n; ++i) values[i] = prob.squared(i * config.psi_grid_step);

  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (values[i] < values[best]) best = i;
  }
  double psi = best * config.psi_grid_step;
  double f = values[best];

  if (config.refine_psi && n >= 3) {
    const double left = best == 0 ? (n - 1) * config.psi_grid_step - kTwoPi : (best - 1) * config.psi_grid_step;
    const double right = best + 1 < n ? (best + 1) * config.psi_grid_step : kTwoPi;
    const double fl = values[(best + n - 1) % n];
    const double fr = values[(best + 1) % n];
    // Parabola through three (possibly unevenly spaced) points.
    const double hl = psi - left, hr = right - psi;
    const double denom = hl * hr * (hl + hr);
    const double curv = 2.0 * (hl * (fr - f) + hr * (fl - f)) / denom;
    if (curv > 0.0) {
      const double slope = (hl * hl * (fr - f) - hr * hr * (fl - f)) / denom;
      const double step = std::clamp(-slope / curv, -hl, hr);
      const double cand = psi + step;
      const double fc = prob.squared(cand);
      if (fc < f) {
        psi = cand;
        f = fc;
      }
    }
  }
  psi = wrap_two_pi(psi);
  return RotationEstimate{prob.rotation(psi), psi, std::sqrt(f)};
}

PositionEstimate estimate_positions(const MeasurementSet& meas, const Rotation& r_ue, const Vec3& p_bs,
                                    const Rotation& r_bs, double propagation_speed) {
  const int num_ips = meas.num_ips();
  if (num_ips < 1) throw PreconditionError("position estimation needs at least one NLoS path");
  const auto& paths = meas.measured.paths;
  const Vec3 d_d0 = direction_from_angles(paths[0].aod);
  const Vec3 p_ue1 = p_bs + r_bs * d_d0;

  std::vector<Vec3> scaled(num_ips);
  VecX beta(num_ips), delta(num_ips);
  PositionEstimate out;
  for (int m = 1; m <= num_ips; ++m) {
    const Vec3 pm = closest_point_to_two_lines(p_bs, r_bs * direction_from_angles(paths[m].aod), p_ue1,
                                               r_ue * direction_from_angles(paths[m].aoa));
    scaled[m - 1] = pm;
    const double rho = (pm - p_bs).norm();
    beta(m - 1) = rho + (p_ue1 - pm).norm() - 1.0;
    delta(m - 1) = propagation_speed * (paths[m].toa - paths[0].toa);
    if (delta(m - 1) < 0.0) out.negative_tdoa = true;
  }
  const double bb = beta.squaredNorm();
  if (!(bb > 0.0)) throw GeometryError("all scaled path-length excesses vanish; range is unobservable");
  out.rho0 = beta.dot(delta) / bb;
  out.p_ue = p_bs + out.rho0 * (r_bs * d_d0);
  out.ips.resize(num_ips);
  for (int m = 0; m < num_ips; ++m) out.ips[m] = p_bs + out.rho0 * (scaled[m] - p_bs);
  return out;
}

double estimate_clock_bias(const MeasurementSet& meas, const Vec3& p_ue, const std::vector<Vec3>& ips,
                           const Vec3& p_bs, double propagation_speed) {
  const auto& paths = meas.measured.paths;
  if (ips.size() + 1 != paths.size()) throw PreconditionError("IP count does not match the measurements");
  double acc = paths[0].toa - (p_ue - p_bs).norm() / propagation_speed;
  for (std::size_t m = 0; m < ips.size(); ++m) {
    acc += paths[m + 1].toa - ((ips[m] - p_bs).norm() + (p_ue - ips[m]).norm()) / propagation_speed;
  }
  return acc / static_cast<double>(paths.size());
}

AdhocEstimate adhoc_estimate(const MeasurementSet& meas, const Vec3& p_bs, const Rotation& r_bs,
                             const AdhocConfig& config, double propagation_speed) {
  const RotationEstimate rot = estimate_rotation(meas, p_bs, r_bs, config);
  const PositionEstimate pos = estimate_positions(meas, rot.r_ue, p_bs, r_bs, propagation_speed);
  AdhocEstimate out;
  out.r_ue = rot.r_ue;
  out.psi = rot.psi;
  out.residual = rot.residual;
  out.p_ue = pos.p_ue;
  out.ips = pos.ips;
  out.rho0 = pos.rho0;
  out.negative_tdoa = pos.negative_tdoa;
  out.clock_bias = estimate_clock_bias(meas, pos.p_ue, pos.ips, p_bs, propagation_speed);
  return out;
}

}  // namespace radloc
