#include "radloc/errors.hpp"
#include "radloc/measurement.hpp"
#include "oracles/von_mises.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace radloc;

namespace {

LikelihoodParams constant_params(int p, double kappa, double var) {
  LikelihoodParams lp;
  lp.kappa_aoa = VecX::Constant(2 * p, kappa);
  lp.kappa_aod = VecX::Constant(2 * p, kappa);
  lp.toa_variance = VecX::Constant(p, var);
  return lp;
}

}  // namespace

TEST(VonMises, KolmogorovSmirnov) {
  for (double kappa : {0.1, 1.0, 10.0, 100.0}) {
    Rng rng = derive_rng(2024, 1, static_cast<std::uint64_t>(kappa * 10));
    std::vector<double> xs(10000);
    for (auto& x : xs) x = sample_von_mises(rng, 0.0, kappa);
    const double d = oracle::ks_statistic(xs, kappa);
    EXPECT_LT(d, oracle::ks_critical_1pct(xs.size())) << "kappa " << kappa;
  }
}

TEST(VonMises, CircularVariance) {
  Rng rng = derive_rng(7, 2, 0);
  const int n = 100000;
  double c = 0.0, s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_von_mises(rng, 1.0, 2.0);
    c += std::cos(x);
    s += std::sin(x);
  }
  const double mean_resultant = std::hypot(c, s) / n;
  const double expect = 1.0 - std::cyl_bessel_i(1.0, 2.0) / std::cyl_bessel_i(0.0, 2.0);
  EXPECT_NEAR(1.0 - mean_resultant, expect, 0.02 * expect);
}

TEST(VonMises, LimitsAndDeterminism) {
  Rng rng = derive_rng(1, 0, 0);
  EXPECT_EQ(sample_von_mises(rng, 0.7, std::numeric_limits<double>::infinity()), 0.7);
  Rng a = derive_rng(5, 5, 5), b = derive_rng(5, 5, 5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_von_mises(a, 0.2, 3.0), sample_von_mises(b, 0.2, 3.0));
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_von_mises(a, 2.0, 0.5);
    EXPECT_GT(x, 2.0 - kPi - 1e-12);
    EXPECT_LE(x, 2.0 + kPi + 1e-12);
  }
  EXPECT_THROW(sample_von_mises(a, 0.0, -1.0), PreconditionError);
}

TEST(Measurements, ToaMoments) {
  const auto st = radloc::testing::make_setup(1, 64, 4);
  const ChannelParams truth = channel_params(st.scene);
  const double var = 1e-20;
  const LikelihoodParams lp = constant_params(2, 1e4, var);
  Rng rng = derive_rng(3, 0, 0);
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = sample_measurements(truth, lp, rng).measured.paths[1].toa - truth.paths[1].toa;
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double sample_var = sq / n - mean * mean;
  EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / n));
  EXPECT_LE(std::abs(sample_var - var), 3.0 * var * std::sqrt(2.0 / n));
}

TEST(Measurements, CanonicalRangesAndExactLimit) {
  const auto st = radloc::testing::make_setup(2, 64, 4);
  const ChannelParams truth = channel_params(st.scene);
  Rng rng = derive_rng(4, 0, 0);
  const auto noisy = sample_measurements(truth, constant_params(3, 2.0, 1e-18), rng);
  for (const auto& p : noisy.measured.paths) {
    EXPECT_GE(p.aoa.azimuth, 0.0);
    EXPECT_LT(p.aoa.azimuth, kTwoPi);
    EXPECT_GE(p.aod.elevation, 0.0);
    EXPECT_LE(p.aod.elevation, kPi);
  }
  const double inf = std::numeric_limits<double>::infinity();
  const auto exact = sample_measurements(truth, constant_params(3, inf, 0.0), rng);
  EXPECT_EQ((exact.measured.eta() - truth.eta()).norm(), 0.0);
  const auto nf = noise_free_measurements(truth, constant_params(3, 1.0, 1.0));
  EXPECT_EQ((nf.measured.eta() - truth.eta()).norm(), 0.0);
  EXPECT_THROW(noise_free_measurements(truth, constant_params(2, 1.0, 1.0)), PreconditionError);
}
