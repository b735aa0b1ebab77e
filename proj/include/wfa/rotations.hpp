#pragma once

#include <cmath>

#include "wfa/geometry.hpp"
#include "wfa/rng.hpp"

namespace wfa {

enum class RotationMode { none, z_only, arbitrary };

namespace detail {

struct Quaternion {
  double w = 1, x = 0, y = 0, z = 0;
};

inline Mat3 quaternion_to_matrix(const Quaternion& q) {
  Mat3 r;
  r(0, 0) = 1 - 2 * (q.y * q.y + q.z * q.z);
  r(0, 1) = 2 * (q.x * q.y - q.w * q.z);
  r(0, 2) = 2 * (q.x * q.z + q.w * q.y);
  r(1, 0) = 2 * (q.x * q.y + q.w * q.z);
  r(1, 1) = 1 - 2 * (q.x * q.x + q.z * q.z);
  r(1, 2) = 2 * (q.y * q.z - q.w * q.x);
  r(2, 0) = 2 * (q.x * q.z - q.w * q.y);
  r(2, 1) = 2 * (q.y * q.z + q.w * q.x);
  r(2, 2) = 1 - 2 * (q.x * q.x + q.y * q.y);
  return r;
}

inline constexpr double two_pi = 6.283185307179586476925286766559;

}  // namespace detail

// Rotation about +z by angle radians. The third row and column are exact.
inline Rotation3 z_rotation(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m;
  m(0, 0) = c; m(0, 1) = -s; m(0, 2) = 0;
  m(1, 0) = s; m(1, 1) = c;  m(1, 2) = 0;
  m(2, 0) = 0; m(2, 1) = 0;  m(2, 2) = 1;
  return Rotation3{m};
}

// Haar-uniform rotation: Shoemake's mapping of three uniforms onto unit
// quaternions.
inline Rotation3 uniform_rotation(Rng& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  detail::Quaternion q;
  q.x = a * std::sin(detail::two_pi * u2);
  q.y = a * std::cos(detail::two_pi * u2);
  q.z = b * std::sin(detail::two_pi * u3);
  q.w = b * std::cos(detail::two_pi * u3);
  return Rotation3{detail::quaternion_to_matrix(q)};
}

// Seeded rotation draw. z_only spins about the z axis with angle uniform in
// [0, 2pi); arbitrary is uniform over SO(3); none returns the identity.
inline Rotation3 random_rotation(Seed seed, RotationMode mode) {
  if (mode == RotationMode::none) return Rotation3{};
  Rng rng(seed);
  if (mode == RotationMode::z_only) return z_rotation(detail::two_pi * rng.uniform());
  return uniform_rotation(rng);
}

}  // namespace wfa
