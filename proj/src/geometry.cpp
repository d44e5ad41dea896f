#include "radloc/geometry.hpp"

#include "radloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radloc {

double wrap_two_pi(double angle) {
  double w = std::fmod(angle, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

SphericalAngles SphericalAngles::canonical(double azimuth, double elevation) {
  // Fold elevation into (-pi, pi], then reflect negative elevations through
  // the pole: d(az, -el) == d(az + pi, el).
  double el = std::remainder(elevation, kTwoPi);
  double az = azimuth;
  if (el < 0.0) {
    el = -el;
    az += kPi;
  }
  return SphericalAngles{wrap_two_pi(az), el};
}

Rotation Rotation::from_matrix(const Mat3& m, double tol) {
  if (!m.allFinite()) throw PreconditionError("rotation matrix has non-finite entries");
  const double orth = orthogonality_error(m);
  const double det = m.determinant();
  if (orth > tol || std::abs(det - 1.0) > tol) {
    throw PreconditionError("matrix is not in SO(3): ||R^T R - I||_F = " + std::to_string(orth) +
                            ", det = " + std::to_string(det));
  }
  return Rotation(m, Unchecked{});
}

Eigen::Matrix<double, 9, 1> Rotation::vec() const {
  return Eigen::Map<const Eigen::Matrix<double, 9, 1>>(m_.data());
}

double orthogonality_error(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).norm();
}

LocalizationState Scene::state() const {
  return LocalizationState{r_ue, p_ue, ips, clock_bias};
}

Scene Scene::with_state(const LocalizationState& s) const {
  Scene out = *this;
  out.r_ue = s.r_ue;
  out.p_ue = s.p_ue;
  out.ips = s.ips;
  out.clock_bias = s.clock_bias;
  if (out.reflection_coeffs.size() != out.ips.size()) {
    out.reflection_coeffs.assign(out.ips.size(), 0.7);
  }
  return out;
}

void Scene::validate() const {
  constexpr double kMinSeparation = 1e-6;
  if (ips.empty()) throw PreconditionError("scene needs at least one incidence point (M >= 1)");
  if (reflection_coeffs.size() != ips.size()) {
    throw PreconditionError("reflection_coeffs length must equal the number of incidence points");
  }
  for (double g : reflection_coeffs) {
    if (!(g > 0.0 && g <= 1.0)) throw PreconditionError("reflection coefficients must lie in (0, 1]");
  }
  if (!(propagation_speed > 0.0)) throw PreconditionError("propagation speed must be positive");
  if (!p_bs.allFinite() || !p_ue.allFinite() || !std::isfinite(clock_bias)) {
    throw PreconditionError("scene contains non-finite values");
  }
  if ((p_ue - p_bs).norm() <= kMinSeparation) throw GeometryError("UE coincides with BS");
  for (std::size_t m = 0; m < ips.size(); ++m) {
    if (!ips[m].allFinite()) throw PreconditionError("incidence point is not finite");
    if ((ips[m] - p_bs).norm() <= kMinSeparation || (ips[m] - p_ue).norm() <= kMinSeparation) {
      throw GeometryError("incidence point " + std::to_string(m + 1) + " coincides with BS or UE");
    }
  }
}

VecX ChannelParams::eta() const {
  const int p = static_cast<int>(paths.size());
  VecX out(eta_index::size(p));
  for (int m = 0; m < p; ++m) {
    out(eta_index::aoa_az(m)) = paths[m].aoa.azimuth;
    out(eta_index::aoa_el(m)) = paths[m].aoa.elevation;
    out(eta_index::aod_az(m, p)) = paths[m].aod.azimuth;
    out(eta_index::aod_el(m, p)) = paths[m].aod.elevation;
    out(eta_index::toa(m, p)) = paths[m].toa;
  }
  return out;
}

ChannelParams ChannelParams::from_eta(const VecX& eta) {
  if (eta.size() % 5 != 0 || eta.size() == 0) throw PreconditionError("eta length must be 5(M+1)");
  const int p = static_cast<int>(eta.size() / 5);
  ChannelParams out;
  out.paths.resize(p);
  for (int m = 0; m < p; ++m) {
    out.paths[m].aoa = SphericalAngles::canonical(eta(eta_index::aoa_az(m)), eta(eta_index::aoa_el(m)));
    out.paths[m].aod = SphericalAngles::canonical(eta(eta_index::aod_az(m, p)), eta(eta_index::aod_el(m, p)));
    out.paths[m].toa = eta(eta_index::toa(m, p));
  }
  return out;
}

Vec3 direction_from_angles(const SphericalAngles& phi) {
  const double se = std::sin(phi.elevation);
  return {se * std::cos(phi.azimuth), se * std::sin(phi.azimuth), std::cos(phi.elevation)};
}

SphericalAngles angles_from_direction(const Vec3& d) {
  if (!d.allFinite() || std::abs(d.norm() - 1.0) > 1e-9) {
    throw PreconditionError("angles_from_direction expects a unit vector");
  }
  const double el = std::acos(std::clamp(d.z(), -1.0, 1.0));
  if (std::hypot(d.x(), d.y()) < 1e-15) return SphericalAngles{0.0, el};
  return SphericalAngles{wrap_two_pi(std::atan2(d.y(), d.x())), el};
}

namespace {

Vec3 unit_towards(const Vec3& from, const Vec3& to) {
  const Vec3 diff = to - from;
  const double n = diff.norm();
  if (!(n > 1e-12)) throw GeometryError("coincident points have no direction");
  return diff / n;
}

void check_path(const Scene& scene, std::size_t m) {
  if (m > scene.ips.size()) throw PreconditionError("path index out of range");
}

}  // namespace

Vec3 arrival_direction(const Scene& scene, std::size_t m) {
  check_path(scene, m);
  const Vec3& target = m == 0 ? scene.p_bs : scene.ips[m - 1];
  return scene.r_ue.matrix().transpose() * unit_towards(scene.p_ue, target);
}

Vec3 departure_direction(const Scene& scene, std::size_t m) {
  check_path(scene, m);
  const Vec3& target = m == 0 ? scene.p_ue : scene.ips[m - 1];
  return scene.r_bs.matrix().transpose() * unit_towards(scene.p_bs, target);
}

double toa(const Scene& scene, std::size_t m) {
  check_path(scene, m);
  if (m == 0) return (scene.p_ue - scene.p_bs).norm() / scene.propagation_speed + scene.clock_bias;
  const Vec3& ip = scene.ips[m - 1];
  return ((ip - scene.p_bs).norm() + (scene.p_ue - ip).norm()) / scene.propagation_speed +
         scene.clock_bias;
}

ChannelParams channel_params(const Scene& scene) {
  ChannelParams out;
  out.paths.resize(scene.num_paths());
  for (std::size_t m = 0; m < scene.num_paths(); ++m) {
    out.paths[m].aoa = angles_from_direction(arrival_direction(scene, m));
    out.paths[m].aod = angles_from_direction(departure_direction(scene, m));
    out.paths[m].toa = toa(scene, m);
  }
  return out;
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Rotation euler_zyx_to_rotation(double alpha, double beta, double gamma) {
  return Rotation::from_matrix(rot_z(alpha) * rot_y(beta) * rot_x(gamma));
}

Mat3 skew(const Vec3& d) {
  Mat3 s;
  s << 0, -d.z(), d.y(), d.z(), 0, -d.x(), -d.y(), d.x(), 0;
  return s;
}

Rotation axis_angle_rotation(const Vec3& u, double psi) {
  if (std::abs(u.norm() - 1.0) > 1e-9) throw PreconditionError("rotation axis must be unit-norm");
  const Vec3 n = u.normalized();
  const Mat3 uut = n * n.transpose();
  const Mat3 q = skew(n) * std::sin(psi) + (Mat3::Identity() - uut) * std::cos(psi) + uut;
  return Rotation::from_matrix(q);
}

}  // namespace radloc
