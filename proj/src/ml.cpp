#include "radloc/ml.hpp"

#include "radloc/errors.hpp"
#include "radloc/fisher.hpp"

#include <cmath>

namespace radloc {

Scene Anchor::scene(const LocalizationState& s) const {
  Scene base;
  base.p_bs = p_bs;
  base.r_bs = r_bs;
  base.propagation_speed = propagation_speed;
  return base.with_state(s);
}

void MlConfig::validate() const {
  if (max_outer_iters <= 0 || euclidean_inner_iters <= 0) throw ConfigError("ML iteration budgets must be positive");
  if (!(nll_rel_tol > 0.0) || !(initial_step > 0.0)) throw ConfigError("ML tolerance and step must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("backtracking shrink factor must lie in (0, 1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
    throw ConfigError("sufficient-decrease constant must lie in (0, 1)");
  }
}

namespace {

void check_inputs(const LocalizationState& s, const MeasurementSet& meas) {
  const int p = meas.num_paths();
  if (p < 2) throw PreconditionError("ML estimation needs at least one NLoS path");
  if (static_cast<int>(s.ips.size()) + 1 != p) throw PreconditionError("state and measurements disagree on M");
  const auto& lp = meas.params;
  if (lp.kappa_aoa.size() != 2 * p || lp.kappa_aod.size() != 2 * p || lp.toa_variance.size() != p) {
    throw PreconditionError("likelihood parameters do not match the measurement count");
  }
  if (!lp.kappa_aoa.allFinite() || !lp.kappa_aod.allFinite() || (lp.kappa_aoa.array() < 0.0).any() ||
      (lp.kappa_aod.array() < 0.0).any()) {
    throw PreconditionError("concentrations must be finite and nonnegative");
  }
  if (!lp.toa_variance.allFinite() || (lp.toa_variance.array() <= 0.0).any()) {
    throw PreconditionError("ToA variances must be finite and positive");
  }
}

double kappa_total(const MeasurementSet& meas) { return meas.params.kappa_aoa.sum() + meas.params.kappa_aod.sum(); }

double angle_kappa(const LikelihoodParams& lp, int i, int p) {
  return i < 2 * p ? lp.kappa_aoa(i) : lp.kappa_aod(i - 2 * p);
}

// -kappa cos(d) = 2 kappa sin^2(d/2) - kappa, so the NLL is 1/2 |r|^2 - sum(kappa)
// with r_i = 2 sqrt(kappa) sin(d/2) for angles and (toa_hat - toa)/sigma for
// delays. Working with the excess 1/2 |r|^2 keeps full precision near the optimum.
struct Residuals {
  VecX r;
  VecX dr;  // dr_i / d eta_i
};

Residuals residuals(const Scene& scene, const MeasurementSet& meas) {
  const int p = meas.num_paths();
  const VecX eta = channel_params(scene).eta();
  const VecX hat = meas.measured.eta();
  Residuals out{VecX(eta.size()), VecX(eta.size())};
  for (int i = 0; i < 4 * p; ++i) {
    const double k = std::sqrt(angle_kappa(meas.params, i, p));
    const double half = 0.5 * (hat(i) - eta(i));
    out.r(i) = 2.0 * k * std::sin(half);
    out.dr(i) = -k * std::cos(half);
  }
  for (int m = 0; m < p; ++m) {
    const int i = eta_index::toa(m, p);
    const double sigma = std::sqrt(meas.params.toa_variance(m));
    out.r(i) = (hat(i) - eta(i)) / sigma;
    out.dr(i) = -1.0 / sigma;
  }
  return out;
}

double excess(const LocalizationState& s, const MeasurementSet& meas, const Anchor& anchor) {
  return 0.5 * residuals(anchor.scene(s), meas).r.squaredNorm();
}

// Whitened Jacobian dr/dxi.
MatX whitened_jacobian(const Scene& scene, const Residuals& res) {
  return res.dr.asDiagonal() * jacobian_upsilon(scene);
}

// Columns vec(R [e_k]x): dR along the three tangent coordinates.
Eigen::Matrix<double, 9, 3> tangent_basis(const Rotation& r) {
  Eigen::Matrix<double, 9, 3> v;
  for (int k = 0; k < 3; ++k) {
    const Mat3 d = r.matrix() * skew(Vec3::Unit(k));
    v.col(k) = Eigen::Map<const VecX>(d.data(), 9);
  }
  return v;
}

bool near_polar(const Vec3& d) { return std::hypot(d.x(), d.y()) < 1e-9; }

bool guard_degenerate_elevation(LocalizationState& s, const Anchor& anchor) {
  const Scene scene = anchor.scene(s);
  for (std::size_t m = 0; m < scene.num_paths(); ++m) {
    if (near_polar(arrival_direction(scene, m))) {
      s.r_ue = s.r_ue * axis_angle_rotation(Vec3::UnitX(), 1e-7);
      return true;
    }
  }
  return false;
}

// Scaled Gauss-Newton direction; falls back to steepest descent.
VecX descent_direction(const MatX& j, const VecX& r, double damping) {
  VecX scale = j.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < scale.size(); ++i) scale(i) = scale(i) > 0.0 ? 1.0 / scale(i) : 1.0;
  const MatX js = j * scale.asDiagonal();
  const VecX g = js.transpose() * r;
  MatX h = js.transpose() * js;
  h.diagonal() *= 1.0 + damping;
  h.diagonal().array() += 1e-14;
  VecX step = -h.ldlt().solve(g);
  if (!step.allFinite() || g.dot(step) >= 0.0) step = -g;
  return scale.asDiagonal() * step;
}

LocalizationState with_zeta(const LocalizationState& s, const VecX& zeta) {
  LocalizationState out = s;
  out.p_ue = zeta.head<3>();
  for (std::size_t m = 0; m < out.ips.size(); ++m) out.ips[m] = zeta.segment<3>(3 + 3 * m);
  out.clock_bias = zeta(zeta.size() - 1);
  return out;
}

VecX zeta_of(const LocalizationState& s) {
  VecX z(3 * (s.ips.size() + 1) + 1);
  z.head<3>() = s.p_ue;
  for (std::size_t m = 0; m < s.ips.size(); ++m) z.segment<3>(3 + 3 * m) = s.ips[m];
  z(z.size() - 1) = s.clock_bias;
  return z;
}

}  // namespace

double nll(const LocalizationState& s, const MeasurementSet& meas, const Anchor& anchor) {
  check_inputs(s, meas);
  const int p = meas.num_paths();
  const VecX eta = channel_params(anchor.scene(s)).eta();
  const VecX hat = meas.measured.eta();
  double out = 0.0;
  for (int i = 0; i < 4 * p; ++i) out -= angle_kappa(meas.params, i, p) * std::cos(hat(i) - eta(i));
  for (int m = 0; m < p; ++m) {
    const int i = eta_index::toa(m, p);
    out += 0.5 * (hat(i) - eta(i)) * (hat(i) - eta(i)) / meas.params.toa_variance(m);
  }
  return out;
}

NllGradients nll_gradients(const LocalizationState& s, const MeasurementSet& meas, const Anchor& anchor) {
  check_inputs(s, meas);
  const Scene scene = anchor.scene(s);
  const Residuals res = residuals(scene, meas);
  const VecX dl_deta = res.r.cwiseProduct(res.dr);
  const VecX g = jacobian_upsilon(scene).transpose() * dl_deta;
  return NllGradients{Eigen::Map<const Mat3>(g.data()), g.tail(g.size() - 9)};
}

Mat3 so3_project(const Rotation& x, const Mat3& u) {
  const Mat3& r = x.matrix();
  return r * (r.transpose() * u - u.transpose() * r) / 2.0;
}

Rotation so3_retract(const Rotation& x, const Mat3& u) {
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(Mat3::Identity() + u.transpose() * u);
  return Rotation::from_matrix((x.matrix() + u) * eig.operatorInverseSqrt());
}

Rotation riemannian_step(const Rotation& r, const Mat3& grad, double step) {
  return so3_retract(r, -step * so3_project(r, grad));
}

MlEstimate ml_estimate(const LocalizationState& init, const MeasurementSet& meas, const Anchor& anchor,
                       const MlConfig& config) {
  config.validate();
  check_inputs(init, meas);
  const double kappa_sum = kappa_total(meas);
  LocalizationState s = init;
  double f = excess(s, meas, anchor);
  if (!std::isfinite(f)) throw PreconditionError("NLL is not finite at the initial point");

  MlEstimate out;
  out.nll_trace.push_back(f - kappa_sum);
  const int nz = static_cast<int>(3 * (s.ips.size() + 1) + 1);

  for (int it = 1; it <= config.max_outer_iters; ++it) {
    const double f_start = f;
    out.iterations = it;

    // (a) one backtracking step on SO(3) with zeta fixed.
    if (guard_degenerate_elevation(s, anchor)) f = excess(s, meas, anchor);
    {
      const Scene scene = anchor.scene(s);
      const Residuals res = residuals(scene, meas);
      const MatX jr = whitened_jacobian(scene, res).leftCols(9) * tangent_basis(s.r_ue);
      const VecX dir = descent_direction(jr, res.r, 0.0);
      const double slope = (jr.transpose() * res.r).dot(dir);
      double step = config.initial_step;
      for (int ls = 0; ls < 60 && slope < 0.0; ++ls, step *= config.shrink) {
        LocalizationState trial = s;
        trial.r_ue = so3_retract(s.r_ue, step * (s.r_ue.matrix() * skew(dir)));
        const double ft = excess(trial, meas, anchor);
        if (ft <= f + config.sufficient_decrease * step * slope) {
          s = trial;
          f = ft;
          break;
        }
      }
    }

    // (b) damped Gauss-Newton on zeta with R fixed.
    double damping = 1e-3;
    for (int inner = 0; inner < config.euclidean_inner_iters; ++inner) {
      const Scene scene = anchor.scene(s);
      const Residuals res = residuals(scene, meas);
      const MatX jz = whitened_jacobian(scene, res).rightCols(nz);
      const VecX dir = descent_direction(jz, res.r, damping);
      const VecX lin = res.r + jz * dir;
      const double predicted = f - 0.5 * lin.squaredNorm();
      const LocalizationState trial = with_zeta(s, zeta_of(s) + dir);
      const double ft = excess(trial, meas, anchor);
      if (std::isfinite(ft) && ft < f && f - ft >= config.sufficient_decrease * predicted) {
        const double prev = f;
        s = trial;
        f = ft;
        damping = std::max(damping / 3.0, 1e-12);
        if (prev - f <= config.nll_rel_tol * prev) break;
      } else {
        damping *= 4.0;
        if (damping > 1e12) break;
      }
    }

    out.nll_trace.push_back(f - kappa_sum);
    if (f_start - f <= config.nll_rel_tol * f_start) {
      out.converged = true;
      break;
    }
  }
  out.r_ue = s.r_ue;
  out.p_ue = s.p_ue;
  out.ips = s.ips;
  out.clock_bias = s.clock_bias;
  out.nll = f - kappa_sum;
  return out;
}

}  // namespace radloc
