#pragma once

#include "radloc/geometry.hpp"
#include "radloc/signal_model.hpp"

namespace radloc {

/// Rz(pi/6) Ry(-pi/4) Rx(-pi/36).
Rotation orientation_r1();
/// Rx(pi/2).
Rotation orientation_r2();

/// Indoor reference scene: BS at [4,0,4] facing down the y axis, UE at
/// [5,4,1] with orientation R2, b = 100 ns. `num_ips` selects the first one
/// or both of the reference incidence points [8,2,1] (Gamma 0.2) and
/// [0,6,2] (Gamma 0.8).
Scene default_scene(int num_ips = 2);

/// Reference signal parameters with 8x8 / 2x2 arrays; beams are left empty
/// and must be drawn per realisation.
SignalConfig default_signal_config();

inline constexpr double kRandomIpReflection = 0.7;

}  // namespace radloc
