#include "radloc/scenario.hpp"

#include "radloc/errors.hpp"

namespace radloc {

Rotation orientation_r1() { return euler_zyx_to_rotation(kPi / 6.0, -kPi / 4.0, -kPi / 36.0); }

Rotation orientation_r2() { return Rotation::from_matrix(rot_x(kPi / 2.0)); }

Scene default_scene(int num_ips) {
  if (num_ips < 1 || num_ips > 2) throw PreconditionError("the reference scene has one or two IPs");
  Scene s;
  s.p_bs = Vec3(4, 0, 4);
  s.r_bs = Rotation::from_matrix(rot_x(-kPi / 2.0));
  s.p_ue = Vec3(5, 4, 1);
  s.r_ue = orientation_r2();
  s.clock_bias = 100e-9;
  s.ips = {Vec3(8, 2, 1), Vec3(0, 6, 2)};
  s.reflection_coeffs = {0.2, 0.8};
  s.ips.resize(num_ips);
  s.reflection_coeffs.resize(num_ips);
  return s;
}

SignalConfig default_signal_config() {
  SignalConfig c;
  set_arrays(c, 8, 2);
  return c;
}

}  // namespace radloc
