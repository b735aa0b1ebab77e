#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "wfa/wfa.hpp"

namespace testutil {

inline bool mat_close(const wfa::Mat3& a, const wfa::Mat3& b, double tol) {
  return wfa::max_abs_diff(a, b) <= tol;
}

inline bool vec_close(wfa::Vec3 a, wfa::Vec3 b, double tol) {
  return wfa::max_abs(a - b) <= tol;
}

inline wfa::PointCloud random_cloud(wfa::Rng& rng, std::size_t n, double extent = 1.0) {
  wfa::PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                        rng.uniform(-extent, extent)});
  return c;
}

inline std::vector<wfa::Vec3> random_points(wfa::Rng& rng, std::size_t n, double extent = 1.0) {
  std::vector<wfa::Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                   rng.uniform(-extent, extent)});
  return pts;
}

inline std::vector<wfa::Vec3> centered(std::vector<wfa::Vec3> pts) {
  wfa::Vec3 mean{};
  for (const wfa::Vec3& p : pts) mean += p;
  mean = mean / static_cast<double>(pts.size());
  for (wfa::Vec3& p : pts) p -= mean;
  return pts;
}

inline std::vector<wfa::Vec3> rotate_all(const wfa::Mat3& r, const std::vector<wfa::Vec3>& pts) {
  std::vector<wfa::Vec3> out;
  out.reserve(pts.size());
  for (const wfa::Vec3& p : pts) out.push_back(r * p);
  return out;
}

}  // namespace testutil
