#pragma once

#include <cstdint>
#include <random>

#include "pcf/geom.hpp"

namespace pcf {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 uniform_unit_vector(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

// Uniform rotation via quaternion sampling.
inline Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4];
  double s;
  do {
    for (double& c : q) c = n(rng);
    s = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
  } while (s < 1e-12);
  const double inv = 1.0 / std::sqrt(s);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return r;
}

}  // namespace pcf
