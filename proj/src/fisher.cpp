#include "radloc/fisher.hpp"

#include "radloc/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace radloc {

namespace {

constexpr cdouble kJ{0.0, 1.0};

Vec3 d_direction_d_az(const SphericalAngles& a) {
  const double se = std::sin(a.elevation);
  return {-se * std::sin(a.azimuth), se * std::cos(a.azimuth), 0.0};
}

Vec3 d_direction_d_el(const SphericalAngles& a) {
  const double ce = std::cos(a.elevation);
  return {ce * std::cos(a.azimuth), ce * std::sin(a.azimuth), -std::sin(a.elevation)};
}

// j (2pi/lambda) a .* (Delta^T dd)
CVecX response_derivative(const ArrayGeometry& g, const CVecX& a, const Vec3& dd, double lambda) {
  const Eigen::VectorXd s = (kTwoPi / lambda) * (g.displacements.transpose() * dd);
  return (kJ * a.array() * s.array().cast<cdouble>()).matrix();
}

struct PathResponses {
  CVecX a_ue, a_ue_az, a_ue_el;
  CVecX a_bs, a_bs_az, a_bs_el;
};

std::vector<PathResponses> path_responses(const ChannelParams& params, const SignalConfig& config) {
  const double lambda = config.wavelength();
  std::vector<PathResponses> out(params.num_paths());
  for (std::size_t m = 0; m < params.num_paths(); ++m) {
    const auto& p = params.paths[m];
    auto& r = out[m];
    r.a_ue = array_response(config.ue_array, p.aoa, lambda);
    r.a_ue_az = response_derivative(config.ue_array, r.a_ue, d_direction_d_az(p.aoa), lambda);
    r.a_ue_el = response_derivative(config.ue_array, r.a_ue, d_direction_d_el(p.aoa), lambda);
    r.a_bs = array_response(config.bs_array, p.aod, lambda);
    r.a_bs_az = response_derivative(config.bs_array, r.a_bs, d_direction_d_az(p.aod), lambda);
    r.a_bs_el = response_derivative(config.bs_array, r.a_bs, d_direction_d_el(p.aod), lambda);
  }
  return out;
}

void check_fim_inputs(const ChannelParams& params, const PathGains& gains, const SignalConfig& config) {
  config.validate();
  if (params.num_paths() == 0) throw PreconditionError("no paths");
  if (gains.size() != params.num_paths()) throw PreconditionError("one gain per path required");
}

// Per-symbol derivative coefficients: d y_{k,n} / d eta_i = c_i * (n-1)^{pow_i} * phi_{path_i}(n).
struct Coefficients {
  std::vector<cdouble> c;
  std::vector<int> path;
  std::vector<int> power;
};

Coefficients symbol_coefficients(const std::vector<PathResponses>& resp, const PathGains& gains,
                                 const SignalConfig& config, int k) {
  const int p = static_cast<int>(resp.size());
  const int n = 7 * p;
  Coefficients out{std::vector<cdouble>(n), std::vector<int>(n), std::vector<int>(n, 0)};
  const double amp = std::sqrt(config.symbol_energy());
  const CVecX& w = config.combiners[k];
  const CVecX& f = config.precoders[k];
  for (int m = 0; m < p; ++m) {
    const auto& r = resp[m];
    const cdouble rx = w.dot(r.a_ue), rx_az = w.dot(r.a_ue_az), rx_el = w.dot(r.a_ue_el);
    const cdouble tx = r.a_bs.transpose() * f;
    const cdouble tx_az = r.a_bs_az.transpose() * f;
    const cdouble tx_el = r.a_bs_el.transpose() * f;
    const cdouble base = amp * rx * tx;
    const cdouble h = gains[m];
    out.c[eta_index::aoa_az(m)] = amp * h * rx_az * tx;
    out.c[eta_index::aoa_el(m)] = amp * h * rx_el * tx;
    out.c[eta_index::aod_az(m, p)] = amp * h * rx * tx_az;
    out.c[eta_index::aod_el(m, p)] = amp * h * rx * tx_el;
    out.c[eta_index::toa(m, p)] = h * base * (-kJ * kTwoPi * config.subcarrier_spacing);
    out.power[eta_index::toa(m, p)] = 1;
    out.c[5 * p + m] = base;
    out.c[6 * p + m] = kJ * base;
    out.path[eta_index::aoa_az(m)] = m;
    out.path[eta_index::aoa_el(m)] = m;
    out.path[eta_index::aod_az(m, p)] = m;
    out.path[eta_index::aod_el(m, p)] = m;
    out.path[eta_index::toa(m, p)] = m;
    out.path[5 * p + m] = m;
    out.path[6 * p + m] = m;
  }
  return out;
}

double fim_scale(const SignalConfig& config) { return 2.0 / (config.noise_figure * config.noise_psd); }

}  // namespace

MatX fim_channel_reference(const ChannelParams& params, const PathGains& gains,
                           const SignalConfig& config) {
  check_fim_inputs(params, gains, config);
  const int p = static_cast<int>(params.num_paths());
  const int dim = 7 * p;
  const auto resp = path_responses(params, config);
  const double amp = std::sqrt(config.symbol_energy());
  const double df = config.subcarrier_spacing;
  MatX j = MatX::Zero(dim, dim);
  CVecX g(dim);
  for (int k = 0; k < config.num_symbols; ++k) {
    const CVecX& w = config.combiners[k];
    const CVecX& f = config.precoders[k];
    for (int n = 0; n < config.num_subcarriers; ++n) {
      for (int m = 0; m < p; ++m) {
        const auto& r = resp[m];
        const cdouble phase = std::polar(1.0, -kTwoPi * n * df * params.paths[m].toa);
        const cdouble s = amp * phase;
        const cdouble h = gains[m];
        const cdouble tx = r.a_bs.transpose() * f;
        const cdouble y_m = s * w.dot(r.a_ue) * tx;
        g(eta_index::aoa_az(m)) = s * h * w.dot(r.a_ue_az) * tx;
        g(eta_index::aoa_el(m)) = s * h * w.dot(r.a_ue_el) * tx;
        g(eta_index::aod_az(m, p)) = s * h * w.dot(r.a_ue) * cdouble(r.a_bs_az.transpose() * f);
        g(eta_index::aod_el(m, p)) = s * h * w.dot(r.a_ue) * cdouble(r.a_bs_el.transpose() * f);
        g(eta_index::toa(m, p)) = h * y_m * (-kJ * kTwoPi * double(n) * df);
        g(5 * p + m) = y_m;
        g(6 * p + m) = kJ * y_m;
      }
      j.noalias() += (g.conjugate() * g.transpose()).real();
    }
  }
  j *= fim_scale(config);
  return 0.5 * (j + j.transpose());
}

MatX fim_channel(const ChannelParams& params, const PathGains& gains, const SignalConfig& config,
                 Exec exec) {
  check_fim_inputs(params, gains, config);
  const int p = static_cast<int>(params.num_paths());
  const int dim = 7 * p;
  const auto resp = path_responses(params, config);

  // s[a](q, r) = sum_n n^a conj(phi_q(n)) phi_r(n), phi_m(n) = exp(-j 2pi n df tau_m).
  std::array<Eigen::MatrixXcd, 3> s;
  for (auto& x : s) x = Eigen::MatrixXcd::Zero(p, p);
  for (int q = 0; q < p; ++q) {
    for (int r = 0; r < p; ++r) {
      const double w = -kTwoPi * config.subcarrier_spacing * (params.paths[r].toa - params.paths[q].toa);
      cdouble s0 = 0.0, s1 = 0.0, s2 = 0.0;
      for (int n = 0; n < config.num_subcarriers; ++n) {
        const cdouble e = std::polar(1.0, w * n);
        const double nn = n;
        s0 += e;
        s1 += nn * e;
        s2 += nn * nn * e;
      }
      s[0](q, r) = s0;
      s[1](q, r) = s1;
      s[2](q, r) = s2;
    }
  }

  const int num_k = config.num_symbols;
  std::vector<MatX> partial(num_k);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (int k = 0; k < num_k; ++k) {
    const Coefficients c = symbol_coefficients(resp, gains, config, k);
    MatX jk(dim, dim);
    for (int a = 0; a < dim; ++a) {
      for (int b = a; b < dim; ++b) {
        const cdouble v = std::conj(c.c[a]) * c.c[b] * s[c.power[a] + c.power[b]](c.path[a], c.path[b]);
        jk(a, b) = v.real();
        jk(b, a) = v.real();
      }
    }
    partial[k] = std::move(jk);
  }
  MatX j = MatX::Zero(dim, dim);
  for (const auto& jk : partial) j += jk;
  return j * fim_scale(config);
}

MatX fim_channel(const Scene& scene, const PathGains& gains, const SignalConfig& config, Exec exec) {
  return fim_channel(channel_params(scene), gains, config, exec);
}

MatX checked_inverse(const MatX& a, const char* what, double rel_cutoff) {
  if (a.rows() != a.cols() || a.rows() == 0) throw PreconditionError("checked_inverse needs a square matrix");
  const Eigen::Index n = a.rows();
  const MatX sym = 0.5 * (a + a.transpose());
  if (!sym.allFinite()) throw PreconditionError(std::string(what) + ": matrix has non-finite entries");
  VecX scale(n);
  std::vector<int> dead;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = sym(i, i);
    if (d > 0.0) {
      scale(i) = 1.0 / std::sqrt(d);
    } else {
      scale(i) = 1.0;
      dead.push_back(static_cast<int>(i));
    }
  }
  if (!dead.empty()) {
    throw IdentifiabilityError(std::string(what) + ": parameters carry no information",
                               static_cast<int>(dead.size()), dead);
  }
  const MatX b = scale.asDiagonal() * sym * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatX> eig(b);
  const VecX& ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  int deficient = 0;
  std::vector<int> weak;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(ev(i) > rel_cutoff * top)) {
      ++deficient;
      Eigen::Index idx;
      eig.eigenvectors().col(i).cwiseAbs().maxCoeff(&idx);
      weak.push_back(static_cast<int>(idx));
    }
  }
  if (deficient > 0 || !(top > 0.0)) {
    throw IdentifiabilityError(std::string(what) + ": information matrix is singular",
                               std::max(deficient, 1), weak);
  }
  const MatX& v = eig.eigenvectors();
  const MatX binv = v * ev.cwiseInverse().asDiagonal() * v.transpose();
  MatX inv = scale.asDiagonal() * binv * scale.asDiagonal();
  return 0.5 * (inv + inv.transpose());
}

MatX efim_channel(const MatX& j_channel) {
  if (j_channel.rows() % 7 != 0 || j_channel.rows() != j_channel.cols()) {
    throw PreconditionError("channel FIM must be 7P x 7P");
  }
  const Eigen::Index n = 5 * (j_channel.rows() / 7);
  // Full invertibility is what the Schur complement needs.
  const MatX inv = checked_inverse(j_channel, "channel FIM");
  return checked_inverse(inv.topLeftCorner(n, n), "EFIM");
}

namespace {

// d az / d d and d el / d d for a unit direction d.
void angle_gradients(const Vec3& d, Vec3& g_az, Vec3& g_el) {
  const double rho2 = d.x() * d.x() + d.y() * d.y();
  if (rho2 < 1e-18) throw GeometryError("direction is polar; azimuth derivative undefined");
  g_az = Vec3(-d.y(), d.x(), 0.0) / rho2;
  g_el = Vec3(0.0, 0.0, -1.0 / std::sqrt(rho2));
}

}  // namespace

MatX jacobian_upsilon(const Scene& scene) {
  const int num_ips = static_cast<int>(scene.num_ips());
  const int p = num_ips + 1;
  MatX u = MatX::Zero(eta_index::size(p), xi_index::size(num_ips));
  const Mat3& r_ue = scene.r_ue.matrix();
  const Mat3& r_bs = scene.r_bs.matrix();
  const double c = scene.propagation_speed;

  auto put3 = [&](int row, int col0, const Vec3& v) { u.block(row, col0, 1, 3) = v.transpose(); };

  for (int m = 0; m < p; ++m) {
    // Arrival: d = R^T unit(target - p_UE).
    {
      const Vec3 target = m == 0 ? scene.p_bs : scene.ips[m - 1];
      const Vec3 diff = target - scene.p_ue;
      const double len = diff.norm();
      if (!(len > 1e-12)) throw GeometryError("coincident points");
      const Vec3 v = diff / len;
      const Vec3 d = r_ue.transpose() * v;
      Vec3 g[2];
      angle_gradients(d, g[0], g[1]);
      const Mat3 proj = (Mat3::Identity() - v * v.transpose()) / len;
      const int rows[2] = {eta_index::aoa_az(m), eta_index::aoa_el(m)};
      for (int t = 0; t < 2; ++t) {
        for (int col = 0; col < 3; ++col) {
          for (int row = 0; row < 3; ++row) u(rows[t], xi_index::rotation(3 * col + row)) = g[t](col) * v(row);
        }
        const Vec3 q = proj * (r_ue * g[t]);
        put3(rows[t], xi_index::p_ue(0), -q);
        if (m > 0) put3(rows[t], xi_index::ip(m, 0), q);
      }
    }
    // Departure: d = R_BS^T unit(target - p_BS).
    {
      const Vec3 target = m == 0 ? scene.p_ue : scene.ips[m - 1];
      const Vec3 diff = target - scene.p_bs;
      const double len = diff.norm();
      if (!(len > 1e-12)) throw GeometryError("coincident points");
      const Vec3 v = diff / len;
      const Vec3 d = r_bs.transpose() * v;
      Vec3 g[2];
      angle_gradients(d, g[0], g[1]);
      const Mat3 proj = (Mat3::Identity() - v * v.transpose()) / len;
      const int rows[2] = {eta_index::aod_az(m, p), eta_index::aod_el(m, p)};
      for (int t = 0; t < 2; ++t) {
        const Vec3 q = proj * (r_bs * g[t]);
        put3(rows[t], m == 0 ? xi_index::p_ue(0) : xi_index::ip(m, 0), q);
      }
    }
    // Delay.
    const int row = eta_index::toa(m, p);
    if (m == 0) {
      put3(row, xi_index::p_ue(0), (scene.p_ue - scene.p_bs).normalized() / c);
    } else {
      const Vec3& ip = scene.ips[m - 1];
      put3(row, xi_index::p_ue(0), (scene.p_ue - ip).normalized() / c);
      put3(row, xi_index::ip(m, 0), ((ip - scene.p_bs).normalized() + (ip - scene.p_ue).normalized()) / c);
    }
    u(row, xi_index::clock_bias(num_ips)) = 1.0;
  }
  return u;
}

MatX fim_localization(const MatX& j_eta, const MatX& upsilon) {
  if (j_eta.rows() != upsilon.rows()) throw PreconditionError("J_eta and Upsilon sizes differ");
  MatX j = upsilon.transpose() * j_eta * upsilon;
  return 0.5 * (j + j.transpose());
}

MatX constraint_gradient(const Rotation& r, int num_ips) {
  if (num_ips < 0) throw PreconditionError("negative IP count");
  const Vec3 r1 = r.column(0), r2 = r.column(1), r3 = r.column(2);
  MatX g = MatX::Zero(6, xi_index::size(num_ips));
  // h = [|r1|^2-1, r2'r1, r3'r1, |r2|^2-1, r2'r3, |r3|^2-1]
  g.block<1, 3>(0, 0) = 2.0 * r1.transpose();
  g.block<1, 3>(1, 0) = r2.transpose();
  g.block<1, 3>(1, 3) = r1.transpose();
  g.block<1, 3>(2, 0) = r3.transpose();
  g.block<1, 3>(2, 6) = r1.transpose();
  g.block<1, 3>(3, 3) = 2.0 * r2.transpose();
  g.block<1, 3>(4, 3) = r3.transpose();
  g.block<1, 3>(4, 6) = r2.transpose();
  g.block<1, 3>(5, 6) = 2.0 * r3.transpose();
  return g;
}

MatX constraint_nullspace(const Rotation& r, int num_ips) {
  if (num_ips < 0) throw PreconditionError("negative IP count");
  const Vec3 r1 = r.column(0), r2 = r.column(1), r3 = r.column(2);
  Eigen::Matrix<double, 9, 3> m0 = Eigen::Matrix<double, 9, 3>::Zero();
  m0.block<3, 1>(0, 0) = -r3;
  m0.block<3, 1>(6, 0) = r1;
  m0.block<3, 1>(3, 1) = -r3;
  m0.block<3, 1>(6, 1) = r2;
  m0.block<3, 1>(0, 2) = r2;
  m0.block<3, 1>(3, 2) = -r1;
  const int rest = 3 * (num_ips + 1) + 1;
  MatX m = MatX::Zero(9 + rest, 3 + rest);
  m.topLeftCorner(9, 3) = m0 / std::sqrt(2.0);
  m.bottomRightCorner(rest, rest).setIdentity();
  return m;
}

MatX ccrb(const MatX& j_xi, const MatX& m, const KnownParams& known) {
  if (j_xi.rows() != m.rows() || j_xi.cols() != j_xi.rows()) throw PreconditionError("CCRB size mismatch");
  const int num_ips = static_cast<int>((m.rows() - 10) / 3) - 1;
  std::vector<int> keep;
  auto add_range = [&keep](int from, int count) {
    for (int i = 0; i < count; ++i) keep.push_back(from + i);
  };
  if (!known.rotation) add_range(0, 3);
  if (!known.position) add_range(3, 3);
  if (!known.ips) add_range(6, 3 * num_ips);
  if (!known.clock_bias) keep.push_back(6 + 3 * num_ips);
  if (keep.empty()) return MatX::Zero(m.rows(), m.rows());
  MatX mk(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) mk.col(static_cast<Eigen::Index>(i)) = m.col(keep[i]);
  const MatX reduced = mk.transpose() * j_xi * mk;
  const MatX c = mk * checked_inverse(reduced, "reduced localization FIM") * mk.transpose();
  return 0.5 * (c + c.transpose());
}

BoundsReport bounds_from_ccrb(const MatX& c, int num_ips) {
  if (num_ips < 1 || c.rows() != xi_index::size(num_ips) || c.cols() != c.rows()) {
    throw PreconditionError("CCRB size does not match the IP count");
  }
  BoundsReport out;
  out.ccrb = c;
  out.identifiable = true;
  auto tr = [&c](int from, int count) { return c.diagonal().segment(from, count).sum(); };
  auto root = [](double x) { return std::sqrt(std::max(0.0, x)); };
  out.oeb = root(tr(0, 9));
  out.peb = root(tr(xi_index::p_ue(0), 3));
  out.ipeb = root(tr(xi_index::ip(1, 0), 3 * num_ips) / num_ips);
  out.seb = root(c(xi_index::clock_bias(num_ips), xi_index::clock_bias(num_ips)));
  return out;
}

double kappa_from_variance(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) throw PreconditionError("variance must be positive");
  const double target = 1.0 / variance;
  if (target > 500.0) return target;
  auto f = [](double k) { return k * std::cyl_bessel_i(1.0, k) / std::cyl_bessel_i(0.0, k); };
  // f(k) ~ k^2/2 near 0 and f(k) < k, so the root lies in [target, sqrt(2 target) + target].
  double lo = 0.0;
  double hi = target + std::sqrt(2.0 * target) + 1.0;
  while (f(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LikelihoodParams likelihood_params(const MatX& j_eta) {
  if (j_eta.rows() % 5 != 0 || j_eta.rows() == 0) throw PreconditionError("J_eta must be 5P x 5P");
  const int p = static_cast<int>(j_eta.rows() / 5);
  const VecX var = checked_inverse(j_eta, "J_eta").diagonal();
  if ((var.array() <= 0.0).any()) throw PreconditionError("non-positive marginal variance");
  LikelihoodParams out;
  out.kappa_aoa.resize(2 * p);
  out.kappa_aod.resize(2 * p);
  for (int i = 0; i < 2 * p; ++i) {
    out.kappa_aoa(i) = kappa_from_variance(var(i));
    out.kappa_aod(i) = kappa_from_variance(var(2 * p + i));
  }
  out.toa_variance = var.segment(4 * p, p);
  return out;
}

MatX decorrelate(const MatX& j_eta) {
  const VecX var = checked_inverse(j_eta, "J_eta").diagonal();
  return var.cwiseInverse().asDiagonal();
}

MatX channel_efim(const Scene& scene, const PathGains& gains, const SignalConfig& config, Exec exec) {
  return efim_channel(fim_channel(scene, gains, config, exec));
}

BoundsReport bounds_from_efim(const Scene& scene, const MatX& j_eta, const BoundsOptions& options) {
  const int num_ips = static_cast<int>(scene.num_ips());
  try {
    const MatX j = options.independent ? decorrelate(j_eta) : j_eta;
    const MatX j_xi = fim_localization(j, jacobian_upsilon(scene));
    const MatX c = ccrb(j_xi, constraint_nullspace(scene.r_ue, num_ips), options.known);
    return bounds_from_ccrb(c, num_ips);
  } catch (const IdentifiabilityError& e) {
    BoundsReport out;
    out.rank_deficiency = e.rank_deficiency();
    return out;
  } catch (const GeometryError&) {
    return BoundsReport{};
  }
}

BoundsReport compute_bounds(const Scene& scene, const PathGains& gains, const SignalConfig& config,
                            const BoundsOptions& options) {
  MatX j_eta;
  try {
    j_eta = channel_efim(scene, gains, config, options.exec);
  } catch (const IdentifiabilityError& e) {
    BoundsReport out;
    out.rank_deficiency = e.rank_deficiency();
    return out;
  } catch (const GeometryError&) {
    return BoundsReport{};
  }
  return bounds_from_efim(scene, j_eta, options);
}

}  // namespace radloc
