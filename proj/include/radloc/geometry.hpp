#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace radloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 3e8;

/// Wraps an angle into [0, 2*pi).
double wrap_two_pi(double angle);

/// Azimuth in [0, 2*pi), elevation in [0, pi]. Construction through
/// canonical() folds any (az, el) pair onto these ranges without changing
/// the direction it describes.
struct SphericalAngles {
  double azimuth = 0.0;
  double elevation = 0.0;

  static SphericalAngles canonical(double azimuth, double elevation);
};

/// Element of SO(3). The only ways to obtain one are the factories below and
/// the operations in this header, all of which keep R^T R = I and det R = +1.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Throws PreconditionError if the matrix is not a rotation within `tol`
  /// (Frobenius norm of R^T R - I, and |det R - 1|).
  static Rotation from_matrix(const Mat3& m, double tol = 1e-10);
  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }
  Vec3 column(int i) const { return m_.col(i); }
  Rotation transpose() const { return Rotation(m_.transpose(), Unchecked{}); }

  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, Unchecked{}); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Column-stacked vec(R) = [r1; r2; r3].
  Eigen::Matrix<double, 9, 1> vec() const;

 private:
  struct Unchecked {};
  Rotation(const Mat3& m, Unchecked) : m_(m) {}
  Mat3 m_;
};

/// Frobenius-norm orthogonality residual ||R^T R - I||_F.
double orthogonality_error(const Mat3& m);

/// Unknown part of the scene: UE pose, incidence points, clock bias.
struct LocalizationState {
  Rotation r_ue;
  Vec3 p_ue = Vec3::Zero();
  std::vector<Vec3> ips;
  double clock_bias = 0.0;

  std::size_t num_ips() const { return ips.size(); }
  /// Length of the stacked vector [vec(R_UE), p_UE, p_1..p_M, b].
  std::size_t xi_size() const { return 3 * (ips.size() + 1) + 10; }
};

/// Ground-truth geometry of one BS, one UE and M single-bounce incidence points.
struct Scene {
  Vec3 p_bs = Vec3::Zero();
  Rotation r_bs;
  Vec3 p_ue = Vec3::Zero();
  Rotation r_ue;
  std::vector<Vec3> ips;
  double clock_bias = 0.0;
  std::vector<double> reflection_coeffs;
  double propagation_speed = kSpeedOfLight;

  std::size_t num_ips() const { return ips.size(); }
  std::size_t num_paths() const { return ips.size() + 1; }

  /// Throws GeometryError / PreconditionError if any invariant is violated.
  void validate() const;

  LocalizationState state() const;
  Scene with_state(const LocalizationState& s) const;
};

/// Per-path channel geometry.
struct PathParams {
  SphericalAngles aoa;
  SphericalAngles aod;
  double toa = 0.0;
};

/// Exact (or measured) angles and delays for paths m = 0 (LoS) .. M.
struct ChannelParams {
  std::vector<PathParams> paths;

  std::size_t num_paths() const { return paths.size(); }
  /// eta = [aoa az/el per path, aod az/el per path, toa per path], LoS first.
  VecX eta() const;
  static ChannelParams from_eta(const VecX& eta);
};

/// Index helpers for the stacked eta vector of a P-path channel.
namespace eta_index {
inline int aoa_az(int m) { return 2 * m; }
inline int aoa_el(int m) { return 2 * m + 1; }
inline int aod_az(int m, int paths) { return 2 * paths + 2 * m; }
inline int aod_el(int m, int paths) { return 2 * paths + 2 * m + 1; }
inline int toa(int m, int paths) { return 4 * paths + m; }
inline int size(int paths) { return 5 * paths; }
}  // namespace eta_index

/// Index helpers for the stacked xi vector with M incidence points.
namespace xi_index {
inline int rotation(int k) { return k; }  // k = 0..8, column-stacked
inline int p_ue(int axis) { return 9 + axis; }
inline int ip(int m, int axis) { return 9 + 3 * m + axis; }  // m = 1..M
inline int clock_bias(int num_ips) { return 3 * (num_ips + 1) + 9; }
inline int size(int num_ips) { return 3 * (num_ips + 1) + 10; }
}  // namespace xi_index

Vec3 direction_from_angles(const SphericalAngles& phi);
SphericalAngles angles_from_direction(const Vec3& d);

Vec3 arrival_direction(const Scene& scene, std::size_t m);
Vec3 departure_direction(const Scene& scene, std::size_t m);
double toa(const Scene& scene, std::size_t m);
ChannelParams channel_params(const Scene& scene);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);
/// R = Rz(alpha) Ry(beta) Rx(gamma), counter-clockwise elementary rotations.
Rotation euler_zyx_to_rotation(double alpha, double beta, double gamma);

Mat3 skew(const Vec3& d);
/// Q_u(psi) = [u]x sin(psi) + (I - u u^T) cos(psi) + u u^T.
Rotation axis_angle_rotation(const Vec3& u, double psi);

}  // namespace radloc
