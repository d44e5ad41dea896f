#pragma once

// Finite-difference reconstructions used only by tests: they rebuild the
// channel FIM and the geometry Jacobian from forward models alone.

#include "radloc/geometry.hpp"
#include "radloc/signal_model.hpp"

#include <cmath>

namespace radloc::oracle {

inline double wrap_pi(double x) { return std::remainder(x, 2.0 * kPi); }

/// Central differences of every y_{k,n} with respect to [eta; h_R; h_I].
inline MatX fd_channel_fim(const ChannelParams& params, const PathGains& gains,
                           const SignalConfig& config) {
  const int p = static_cast<int>(params.num_paths());
  const int dim = 7 * p;
  const double tau_step = 1e-5 / (2.0 * kPi * config.num_subcarriers * config.subcarrier_spacing);
  std::vector<Eigen::MatrixXcd> deriv(dim);
  for (int i = 0; i < dim; ++i) {
    ChannelParams plus = params, minus = params;
    PathGains gp = gains, gm = gains;
    double h;
    const int block = i / p, m = i % p;
    auto& pp = plus.paths[m];
    auto& pm = minus.paths[m];
    // eta ordering: aoa (az, el) per path, aod (az, el) per path, toa.
    if (i < 2 * p) {
      h = 1e-6;
      auto& a = (i % 2 == 0) ? plus.paths[i / 2].aoa.azimuth : plus.paths[i / 2].aoa.elevation;
      auto& b = (i % 2 == 0) ? minus.paths[i / 2].aoa.azimuth : minus.paths[i / 2].aoa.elevation;
      a += h;
      b -= h;
    } else if (i < 4 * p) {
      h = 1e-6;
      const int j = i - 2 * p;
      auto& a = (j % 2 == 0) ? plus.paths[j / 2].aod.azimuth : plus.paths[j / 2].aod.elevation;
      auto& b = (j % 2 == 0) ? minus.paths[j / 2].aod.azimuth : minus.paths[j / 2].aod.elevation;
      a += h;
      b -= h;
    } else if (block == 4) {
      h = tau_step;
      pp.toa += h;
      pm.toa -= h;
    } else if (block == 5) {
      h = 1e-3 * std::abs(gains[m]);
      gp[m] += h;
      gm[m] -= h;
    } else {
      h = 1e-3 * std::abs(gains[m]);
      gp[m] += cdouble(0.0, h);
      gm[m] -= cdouble(0.0, h);
    }
    deriv[i] = (noise_free_observation(plus, gp, config) - noise_free_observation(minus, gm, config)) /
               (2.0 * h);
  }
  MatX j(dim, dim);
  const double scale = 2.0 / (config.noise_figure * config.noise_psd);
  for (int a = 0; a < dim; ++a) {
    for (int b = 0; b < dim; ++b) j(a, b) = scale * (deriv[a].conjugate().cwiseProduct(deriv[b])).sum().real();
  }
  return j;
}

/// Tangent direction at R for the 3 rotation degrees of freedom, matching
/// the columns of the constraint nullspace basis: dR = R * Omega_t.
inline Mat3 tangent_generator(int t) {
  Mat3 w = Mat3::Zero();
  if (t == 0) {  // dR = [-r3, 0, r1]
    w(2, 0) = -1.0;
    w(0, 2) = 1.0;
  } else if (t == 1) {  // dR = [0, -r3, r2]
    w(2, 1) = -1.0;
    w(1, 2) = 1.0;
  } else {  // dR = [r2, -r1, 0]
    w(1, 0) = 1.0;
    w(0, 1) = -1.0;
  }
  return w;
}

inline Mat3 expm_skew(const Mat3& w, double eps) {
  const Vec3 axis(w(2, 1), w(0, 2), w(1, 0));
  const double n = axis.norm();
  return axis_angle_rotation(axis / n, eps * n).matrix();
}

/// Columns: central differences of eta along each xi coordinate; rotation
/// columns are replaced by derivatives along the three tangent curves
/// R expm(eps Omega_t), to be compared with Upsilon * vec(R Omega_t).
inline MatX fd_jacobian(const Scene& scene, MatX* rotation_directions) {
  const int num_ips = static_cast<int>(scene.num_ips());
  const int cols = 3 + 3 * (num_ips + 1) + 1;
  const int p = num_ips + 1;
  MatX out(eta_index::size(p), cols);
  auto diff = [&](const Scene& a, const Scene& b, double h) {
    const VecX ea = channel_params(a).eta(), eb = channel_params(b).eta();
    VecX d = ea - eb;
    for (int i = 0; i < 4 * p; ++i) d(i) = wrap_pi(d(i));
    return VecX(d / (2.0 * h));
  };
  if (rotation_directions) rotation_directions->resize(9, 3);
  for (int t = 0; t < 3; ++t) {
    const double h = 1e-6;
    const Mat3 w = tangent_generator(t);
    Scene a = scene, b = scene;
    a.r_ue = Rotation::from_matrix(scene.r_ue.matrix() * expm_skew(w, h));
    b.r_ue = Rotation::from_matrix(scene.r_ue.matrix() * expm_skew(w, -h));
    out.col(t) = diff(a, b, h);
    if (rotation_directions) {
      const Mat3 dr = scene.r_ue.matrix() * w;
      rotation_directions->col(t) = Eigen::Map<const VecX>(dr.data(), 9);
    }
  }
  int col = 3;
  auto perturb_point = [&](auto getter) {
    for (int ax = 0; ax < 3; ++ax, ++col) {
      const double h = 1e-6;
      Scene a = scene, b = scene;
      getter(a)(ax) += h;
      getter(b)(ax) -= h;
      out.col(col) = diff(a, b, h);
    }
  };
  perturb_point([](Scene& s) -> Vec3& { return s.p_ue; });
  for (int m = 0; m < num_ips; ++m) perturb_point([m](Scene& s) -> Vec3& { return s.ips[m]; });
  {
    const double h = 1e-12;
    Scene a = scene, b = scene;
    a.clock_bias += h;
    b.clock_bias -= h;
    out.col(col) = diff(a, b, h);
  }
  return out;
}

}  // namespace radloc::oracle
