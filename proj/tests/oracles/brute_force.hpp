#pragma once

// Zooming grid searches for convex geometric problems. Each level scans a
// dense grid, then shrinks the window around the best cell. Test-only.

#include "radloc/geometry.hpp"

#include <algorithm>
#include <limits>

namespace radloc::oracle {

struct GridHalfLine {
  double distance;
  double t1;
  double t2;
};

/// 400 x 400 grid over [0, t_max]^2, refined by zooming.
inline GridHalfLine grid_halfline_distance(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2,
                                           double t_max = 50.0, int levels = 3) {
  constexpr int n = 400;
  double lo1 = 0.0, hi1 = t_max, lo2 = 0.0, hi2 = t_max;
  GridHalfLine best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (int level = 0; level < levels; ++level) {
    const double s1 = (hi1 - lo1) / (n - 1), s2 = (hi2 - lo2) / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double t1 = lo1 + i * s1;
      for (int j = 0; j < n; ++j) {
        const double t2 = lo2 + j * s2;
        const double d = (p1 + t1 * d1 - p2 - t2 * d2).norm();
        if (d < best.distance) best = {d, t1, t2};
      }
    }
    lo1 = std::max(0.0, best.t1 - 4 * s1);
    hi1 = std::min(t_max, best.t1 + 4 * s1);
    lo2 = std::max(0.0, best.t2 - 4 * s2);
    hi2 = std::min(t_max, best.t2 + 4 * s2);
  }
  return best;
}

/// Point minimising the summed squared distances to two full lines, by a
/// zooming 3D grid over the cube centred at `centre` with half-width `half`.
inline Vec3 grid_closest_point(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2,
                               const Vec3& centre, double half, int levels = 6) {
  constexpr int n = 41;
  auto cost = [&](const Vec3& x) {
    const Vec3 a = (x - p1) - d1 * d1.dot(x - p1);
    const Vec3 b = (x - p2) - d2 * d2.dot(x - p2);
    return a.squaredNorm() + b.squaredNorm();
  };
  Vec3 c = centre;
  double h = half;
  for (int level = 0; level < levels; ++level) {
    const double s = 2.0 * h / (n - 1);
    Vec3 best = c;
    double fbest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const Vec3 x = c + Vec3(-h + i * s, -h + j * s, -h + k * s);
          const double f = cost(x);
          if (f < fbest) {
            fbest = f;
            best = x;
          }
        }
      }
    }
    c = best;
    h = 3.0 * s;
  }
  return c;
}

}  // namespace radloc::oracle
