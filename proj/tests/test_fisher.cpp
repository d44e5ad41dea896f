#include "radloc/errors.hpp"
#include "radloc/fisher.hpp"
#include "oracles/fd_oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace radloc;
using radloc::testing::make_setup;
using radloc::testing::rel_frobenius;

namespace {

double min_rel_eigen(const MatX& a) {
  Eigen::SelfAdjointEigenSolver<MatX> eig(a);
  return eig.eigenvalues().minCoeff() / eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TEST(ChannelFim, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto st = make_setup(2, 64, 4, seed);
    const ChannelParams cp = channel_params(st.scene);
    const MatX fast = fim_channel(cp, st.gains, st.config);
    const MatX fd = oracle::fd_channel_fim(cp, st.gains, st.config);
    EXPECT_LE(rel_frobenius(fast, fd), 1e-6) << "seed " << seed;
  }
}

TEST(ChannelFim, FactorisedEqualsDirectSum) {
  auto st = make_setup(2, 200, 5, 4);
  const ChannelParams cp = channel_params(st.scene);
  const MatX ref = fim_channel_reference(cp, st.gains, st.config);
  const MatX fast = fim_channel(cp, st.gains, st.config, Exec::serial);
  EXPECT_LE(rel_frobenius(fast, ref), 1e-10);
}

TEST(ChannelFim, ParallelBitIdenticalToSerial) {
  auto st = make_setup(2, 333, 10, 5);
  const ChannelParams cp = channel_params(st.scene);
  const MatX a = fim_channel(cp, st.gains, st.config, Exec::serial);
  const MatX b = fim_channel(cp, st.gains, st.config, Exec::parallel);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ChannelFim, StructureAndPowerScaling) {
  auto st = make_setup(2, 64, 4, 6);
  const ChannelParams cp = channel_params(st.scene);
  const MatX j = fim_channel(cp, st.gains, st.config);
  const int p = 3;
  EXPECT_LE((j - j.transpose()).norm(), 1e-12 * j.norm());
  EXPECT_GE(min_rel_eigen(j), -1e-9);
  for (int m = 0; m < p; ++m) {
    EXPECT_NEAR(j(5 * p + m, 5 * p + m), j(6 * p + m, 6 * p + m), 1e-9 * j(5 * p + m, 5 * p + m));
    EXPECT_NEAR(j(5 * p + m, 6 * p + m), 0.0, 1e-9 * j(5 * p + m, 5 * p + m));
  }
  SignalConfig louder = st.config;
  louder.transmit_power *= 10.0;
  const MatX j10 = fim_channel(cp, st.gains, louder);
  EXPECT_LE(rel_frobenius(j10, 10.0 * j), 1e-12);
}

TEST(Efim, SchurComplementProperties) {
  auto st = make_setup(2, 64, 4, 7);
  const MatX j = fim_channel(st.scene, st.gains, st.config);
  const MatX e = efim_channel(j);
  ASSERT_EQ(e.rows(), 15);
  const MatX block = j.topLeftCorner(15, 15);
  // EFIM <= eta block: the difference is PSD
  EXPECT_GE(min_rel_eigen(block - e), -1e-9);
  EXPECT_LE((e - e.transpose()).norm(), 1e-9 * e.norm());

  MatX decoupled = j;
  decoupled.topRightCorner(15, 6).setZero();
  decoupled.bottomLeftCorner(6, 15).setZero();
  EXPECT_LE(rel_frobenius(efim_channel(decoupled), block), 1e-9);

  MatX singular = j;
  singular.row(0).setZero();
  singular.col(0).setZero();
  EXPECT_THROW(efim_channel(singular), IdentifiabilityError);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int trial = 0; trial < 5; ++trial) {
    Scene s = default_scene(2);
    if (trial > 0) s.r_ue = euler_zyx_to_rotation(ang(rng), ang(rng) / 2.0, ang(rng));
    const MatX u = jacobian_upsilon(s);
    MatX dirs;
    const MatX fd = oracle::fd_jacobian(s, &dirs);
    MatX analytic(u.rows(), fd.cols());
    analytic.leftCols(3) = u.leftCols(9) * dirs;
    analytic.rightCols(fd.cols() - 3) = u.rightCols(u.cols() - 9);
    EXPECT_LE(rel_frobenius(analytic, fd), 1e-6);
    const int p = 3;
    // ToA rows on their own scale
    EXPECT_LE(rel_frobenius(analytic.bottomRows(p), fd.bottomRows(p)), 1e-6);
  }
}

TEST(Jacobian, KnownEntries) {
  const Scene s = default_scene(2);
  const MatX u = jacobian_upsilon(s);
  const int p = 3;
  for (int m = 0; m < p; ++m) {
    EXPECT_EQ(u(eta_index::toa(m, p), xi_index::clock_bias(2)), 1.0);
    EXPECT_EQ(u.row(eta_index::toa(m, p)).head(9).norm(), 0.0);
    EXPECT_EQ(u.row(eta_index::aod_az(m, p)).head(9).norm(), 0.0);
  }
  const Vec3 expect = (s.p_ue - s.p_bs) / (kSpeedOfLight * (s.p_ue - s.p_bs).norm());
  EXPECT_LE((u.block(eta_index::toa(0, p), xi_index::p_ue(0), 1, 3).transpose() - expect).norm(), 1e-20);
}

TEST(Nullspace, OrthonormalAndAnnihilated) {
  const MatX m = constraint_nullspace(Rotation::identity(), 2);
  EXPECT_EQ(m.rows(), 19);
  EXPECT_EQ(m.cols(), 13);
  EXPECT_LE((m.transpose() * m - MatX::Identity(13, 13)).norm(), 1e-14);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = euler_zyx_to_rotation(ang(rng), ang(rng), ang(rng));
    const MatX g = constraint_gradient(r, 1);
    const MatX mm = constraint_nullspace(r, 1);
    EXPECT_LE((g * mm).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Ccrb, IdentityAndOrdering) {
  const MatX m = constraint_nullspace(orientation_r1(), 1);
  const int n = static_cast<int>(m.rows());
  const MatX c = ccrb(MatX::Identity(n, n), m);
  EXPECT_LE((c - m * m.transpose()).norm(), 1e-12);

  auto st = make_setup(1, 64, 4, 8);
  const MatX j_eta = efim_channel(fim_channel(st.scene, st.gains, st.config));
  MatX j_xi = fim_localization(j_eta, jacobian_upsilon(st.scene));
  const MatX mm = constraint_nullspace(st.scene.r_ue, 1);
  const MatX cc = ccrb(j_xi, mm);
  EXPECT_LE((cc - cc.transpose()).norm(), 1e-9 * cc.norm());
  EXPECT_GE(min_rel_eigen(cc), -1e-9);
  EXPECT_TRUE((cc.diagonal().array() >= 0.0).all());

  // Constrained bound is no larger than the unconstrained one on the tangent
  // space, once J_xi is regularised to be invertible.
  j_xi += 1e-6 * j_xi.diagonal().asDiagonal().toDenseMatrix();
  const MatX cu = checked_inverse(j_xi, "J_xi");
  const MatX cc2 = ccrb(j_xi, mm);
  const MatX diff = mm.transpose() * (cu - cc2) * mm;
  EXPECT_GE(min_rel_eigen(diff), -1e-6);
}

TEST(Bounds, DefinitionsAndKnownParameters) {
  MatX c = MatX::Zero(16, 16);
  c.topLeftCorner(9, 9) = 0.01 * MatX::Identity(9, 9);
  c.diagonal().segment(9, 3).setConstant(4.0);
  c.diagonal().segment(12, 3).setConstant(1.0);
  c(15, 15) = 9.0;
  const BoundsReport b = bounds_from_ccrb(c, 1);
  EXPECT_NEAR(b.oeb, 0.3, 1e-15);
  EXPECT_NEAR(b.peb, std::sqrt(12.0), 1e-15);
  EXPECT_NEAR(b.ipeb, std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(b.seb, 3.0, 1e-15);

  auto st = make_setup(2, 64, 4, 9);
  const BoundsReport full = compute_bounds(st.scene, st.gains, st.config);
  ASSERT_TRUE(full.identifiable);
  BoundsOptions opt;
  opt.known = {true, true, true, false};
  const BoundsReport only_b = compute_bounds(st.scene, st.gains, st.config, opt);
  ASSERT_TRUE(only_b.identifiable);
  EXPECT_LE(only_b.seb, full.seb);
  EXPECT_EQ(only_b.oeb, 0.0);
  EXPECT_EQ(only_b.peb, 0.0);
}

TEST(Bounds, PowerScaling) {
  auto st = make_setup(2, 64, 4, 10);
  const BoundsReport a = compute_bounds(st.scene, st.gains, st.config);
  SignalConfig louder = st.config;
  louder.transmit_power *= 10.0;
  const BoundsReport b = compute_bounds(st.scene, st.gains, louder);
  ASSERT_TRUE(a.identifiable && b.identifiable);
  const double s = 1.0 / std::sqrt(10.0);
  EXPECT_NEAR(b.oeb / a.oeb, s, 1e-9 * s);
  EXPECT_NEAR(b.peb / a.peb, s, 1e-9 * s);
  EXPECT_NEAR(b.ipeb / a.ipeb, s, 1e-9 * s);
  EXPECT_NEAR(b.seb / a.seb, s, 1e-9 * s);
}

TEST(Bounds, SingleIpIsIdentifiable) {
  auto st = make_setup(1, 3333, 10, 11);
  const BoundsReport b = compute_bounds(st.scene, st.gains, st.config);
  ASSERT_TRUE(b.identifiable);
  for (double v : {b.oeb, b.peb, b.ipeb, b.seb}) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
  }
}

TEST(Kappa, RootFinding) {
  // Independent root (scipy brentq on scaled Bessel functions).
  EXPECT_NEAR(kappa_from_variance(1.0), 1.6082794717268796, 1e-9);
  EXPECT_NEAR(kappa_from_variance(0.1), 10.513234002580923, 1e-8);
  EXPECT_NEAR(kappa_from_variance(4.0), 0.729774481317805, 1e-9);
  for (double var : {3.0, 1.0, 0.3, 0.05, 0.0021}) {
    const double k = kappa_from_variance(var);
    const double f = k * std::cyl_bessel_i(1.0, k) / std::cyl_bessel_i(0.0, k);
    EXPECT_NEAR(f, 1.0 / var, 1e-8 / var);
  }
  EXPECT_EQ(kappa_from_variance(1e-4), 1e4);
  EXPECT_THROW(kappa_from_variance(0.0), PreconditionError);
  EXPECT_THROW(kappa_from_variance(-1.0), PreconditionError);
}

TEST(Likelihood, ExtractionAndDecorrelation) {
  auto st = make_setup(2, 64, 4, 12);
  const MatX j_eta = channel_efim(st.scene, st.gains, st.config);
  const LikelihoodParams lp = likelihood_params(j_eta);
  EXPECT_EQ(lp.kappa_aoa.size(), 6);
  EXPECT_EQ(lp.kappa_aod.size(), 6);
  EXPECT_EQ(lp.toa_variance.size(), 3);
  const VecX var = checked_inverse(j_eta, "J").diagonal();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(lp.toa_variance(i), var(12 + i), 1e-12 * var(12 + i));
  EXPECT_TRUE((lp.kappa_aoa.array() > 0).all());

  const MatX ind = decorrelate(j_eta);
  for (int i = 0; i < 15; ++i) EXPECT_LE(ind(i, i), j_eta(i, i) * (1 + 1e-12));
  const MatX diag = VecX::LinSpaced(5, 1.0, 5.0).asDiagonal();
  EXPECT_LE((decorrelate(diag) - diag).norm(), 1e-14);
}

TEST(CheckedInverse, ReportsDeficiency) {
  MatX a = MatX::Identity(4, 4);
  a(3, 3) = 1.0;
  a(2, 3) = a(3, 2) = 1.0;
  a(2, 2) = 1.0;  // rows 2 and 3 identical
  try {
    checked_inverse(a, "test");
    FAIL() << "expected IdentifiabilityError";
  } catch (const IdentifiabilityError& e) {
    EXPECT_EQ(e.rank_deficiency(), 1);
    ASSERT_EQ(e.weak_parameters().size(), 1u);
    EXPECT_GE(e.weak_parameters()[0], 2);
  }
}
