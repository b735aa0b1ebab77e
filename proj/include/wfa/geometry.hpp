#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "wfa/error.hpp"
#include "wfa/mat3.hpp"
#include "wfa/vec3.hpp"

namespace wfa {

using Point3 = Vec3;

// Ordered sequence of 3D points with optional unit normals. Stored ordered
// (index-addressable) so neighborhoods and correspondences can be expressed
// through index sets.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;

  std::size_t size() const { return points.size(); }
};

// A proper rotation: orthogonal with determinant +1. Construct through
// validate_rotation unless validity is structural (e.g. built from a unit
// quaternion).
struct Rotation3 {
  Mat3 m = Mat3::identity();
};

// Orthogonal but possibly reflecting (det either +1 or -1). Houses PCA bases
// and alignment rotations, whose sign rules do not constrain the determinant.
struct OrthogonalFrame {
  Mat3 m = Mat3::identity();
};

// Checks the PointCloud invariants: at least one point, all coordinates
// finite, normals (when present) matching the point count and unit to 1e-6.
inline void validate_cloud(const PointCloud& cloud) {
  if (cloud.points.empty()) throw Error("point cloud must contain at least one point");
  for (const Vec3& p : cloud.points)
    if (!is_finite(p)) throw NonFinite("point cloud contains a non-finite coordinate");
  if (cloud.normals) {
    if (cloud.normals->size() != cloud.points.size())
      throw ShapeMismatch("normal count does not match point count");
    for (const Vec3& n : *cloud.normals) {
      if (!is_finite(n)) throw NonFinite("point cloud contains a non-finite normal");
      if (std::fabs(norm(n) - 1.0) > 1e-6) throw Error("normals must be unit length (1e-6)");
    }
  }
}

inline Rotation3 validate_rotation(const Mat3& m, double tol) {
  if (!(tol > 0.0)) throw Error("validate_rotation: tol must be positive");
  if (!is_finite(m)) throw NonFinite("validate_rotation: non-finite entry");
  const double orth = orthogonality_error(m);
  if (orth > tol)
    throw NotOrthogonal("validate_rotation: m m^T deviates from identity by " + std::to_string(orth));
  const double d = det3(m);
  if (std::fabs(d - 1.0) > tol)
    throw NotProper("validate_rotation: determinant is " + std::to_string(d) + ", not +1");
  return Rotation3{m};
}

// p -> r p + t for points; normals rotate only.
inline PointCloud apply_rigid(const PointCloud& cloud, const Rotation3& r, Vec3 t) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(r.m * p + t);
  if (cloud.normals) {
    std::vector<Vec3> normals;
    normals.reserve(cloud.normals->size());
    for (const Vec3& n : *cloud.normals) normals.push_back(r.m * n);
    out.normals = std::move(normals);
  }
  return out;
}

}  // namespace wfa
