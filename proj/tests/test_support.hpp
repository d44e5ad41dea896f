#pragma once

#include "radloc/rng.hpp"
#include "radloc/scenario.hpp"
#include "radloc/signal_model.hpp"

namespace radloc::testing {

/// Reference scene and signal, shrunk to N_f subcarriers and K symbols,
/// with beams and gain phases drawn from `seed`.
struct Setup {
  Scene scene;
  SignalConfig config;
  PathGains gains;
};

inline Setup make_setup(int num_ips = 2, int nf = 64, int k = 4, std::uint64_t seed = 1) {
  Setup s;
  s.scene = default_scene(num_ips);
  s.config = default_signal_config();
  s.config.num_subcarriers = nf;
  s.config.num_symbols = k;
  Rng rng = derive_rng(seed, 0, 0);
  draw_beams(s.config, rng);
  s.gains = channel_gains(s.scene, s.config.wavelength(), rng);
  return s;
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace radloc::testing
