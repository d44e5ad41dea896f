#pragma once

#include "radloc/geometry.hpp"
#include "radloc/signal_model.hpp"

#include <limits>

namespace radloc {

enum class Exec { serial, parallel };

/// Channel-parameter FIM ordered [eta; h_R; h_I], size 7P for P paths.
/// Direct double sum over symbols and subcarriers; kept as the reference.
MatX fim_channel_reference(const ChannelParams& params, const PathGains& gains,
                           const SignalConfig& config);

/// Same matrix, factorised: subcarrier sums are shared across symbols and the
/// symbol loop runs under OpenMP. Per-symbol partials are reduced in symbol
/// order, so serial and parallel results are bit-identical.
MatX fim_channel(const ChannelParams& params, const PathGains& gains, const SignalConfig& config,
                 Exec exec = Exec::parallel);
MatX fim_channel(const Scene& scene, const PathGains& gains, const SignalConfig& config,
                 Exec exec = Exec::parallel);

/// Inverse of the eta block of J^{-1}: the gains are treated as nuisance.
MatX efim_channel(const MatX& j_channel);

/// d eta / d xi, 5P x (3P + 10).
MatX jacobian_upsilon(const Scene& scene);

MatX fim_localization(const MatX& j_eta, const MatX& upsilon);

/// Gradient of the six orthogonality constraints on vec(R), 6 x xi_size.
MatX constraint_gradient(const Rotation& r, int num_ips);
/// Orthonormal basis of the constraint tangent space, xi_size x (3M + 7).
MatX constraint_nullspace(const Rotation& r, int num_ips);

/// Parameters assumed known a priori. Their columns are removed from the
/// nullspace basis before inversion, so they contribute zero to the bound.
struct KnownParams {
  bool rotation = false;
  bool position = false;
  bool ips = false;
  bool clock_bias = false;
};

MatX ccrb(const MatX& j_xi, const MatX& m, const KnownParams& known = {});

struct BoundsReport {
  MatX ccrb;  // empty when the problem is not identifiable
  double oeb = std::numeric_limits<double>::infinity();
  double peb = std::numeric_limits<double>::infinity();
  double ipeb = std::numeric_limits<double>::infinity();
  double seb = std::numeric_limits<double>::infinity();
  bool identifiable = false;
  int rank_deficiency = 0;
};

BoundsReport bounds_from_ccrb(const MatX& ccrb, int num_ips);

/// Concentrations per angle (az, el interleaved per path) and ToA variances.
struct LikelihoodParams {
  VecX kappa_aoa;
  VecX kappa_aod;
  VecX toa_variance;

  int num_paths() const { return static_cast<int>(toa_variance.size()); }
};

/// Solves kappa I1(kappa)/I0(kappa) = 1/variance.
double kappa_from_variance(double variance);
LikelihoodParams likelihood_params(const MatX& j_eta);

/// (diag(J^{-1}))^{-1}.
MatX decorrelate(const MatX& j_eta);

/// Inverse of a symmetric positive definite matrix after symmetric diagonal
/// scaling. Throws IdentifiabilityError when the smallest eigenvalue of the
/// scaled matrix is at most `rel_cutoff` times the largest.
MatX checked_inverse(const MatX& a, const char* what, double rel_cutoff = 1e-12);

struct BoundsOptions {
  bool independent = false;  // replace J_eta by its decorrelated version
  KnownParams known;
  Exec exec = Exec::parallel;
};

/// Scene -> J_eta -> J_xi -> CCRB -> scalar bounds. Non-identifiable cases
/// come back with infinite bounds rather than an exception.
BoundsReport compute_bounds(const Scene& scene, const PathGains& gains, const SignalConfig& config,
                            const BoundsOptions& options = {});

/// Same pipeline starting from an already computed J_eta.
BoundsReport bounds_from_efim(const Scene& scene, const MatX& j_eta, const BoundsOptions& options = {});

/// EFIM of (AoA, AoD, ToA) for a scene.
MatX channel_efim(const Scene& scene, const PathGains& gains, const SignalConfig& config,
                  Exec exec = Exec::parallel);

}  // namespace radloc
