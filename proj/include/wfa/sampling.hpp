#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "wfa/error.hpp"
#include "wfa/geometry.hpp"

namespace wfa {

// A query point's neighborhood. indices lists members ascending; when the
// ball holds fewer than the requested width, copies of the nearest member
// are appended and padded is set.
struct NeighborSet {
  std::size_t query_index = 0;
  std::vector<std::size_t> indices;
  double radius = 0.0;
  bool padded = false;
};

// Greedy farthest point sampling: start at start_index, then repeatedly take
// the unselected point maximizing the minimum distance to everything already
// selected. Distance ties break to the smallest index, so the selection
// depends only on the inter-point distances.
inline std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k,
                                                      std::size_t start_index) {
  const std::size_t n = cloud.points.size();
  if (k < 1 || k > n) throw BadCount("farthest_point_sample: k out of range");
  if (start_index >= n) throw BadCount("farthest_point_sample: start_index out of range");

  std::vector<std::size_t> picked;
  picked.reserve(k);
  std::vector<char> selected(n, 0);
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());

  std::size_t current = start_index;
  picked.push_back(current);
  selected[current] = 1;

  for (std::size_t step = 1; step < k; ++step) {
    const Vec3 latest = cloud.points[current];
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = squared_distance(cloud.points[i], latest);
      if (d2 < min_sq[i]) min_sq[i] = d2;
    }
    double best = -1.0;
    std::size_t best_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      if (min_sq[i] > best) {  // strict: smallest index wins ties
        best = min_sq[i];
        best_i = i;
      }
    }
    picked.push_back(best_i);
    selected[best_i] = 1;
    current = best_i;
  }
  return picked;
}

// All points within distance r of the query (the query itself included),
// ascending by index. More than max_n members: keep the max_n nearest, ties
// to the smaller index. Fewer: append copies of the nearest non-query member
// (the query itself when it is alone) until the set has max_n entries.
inline NeighborSet radius_neighbors(const PointCloud& cloud, std::size_t query_index, double r,
                                    std::size_t max_n) {
  if (!(r > 0.0)) throw BadRadius("radius_neighbors: radius must be positive");
  if (max_n < 1) throw BadCount("radius_neighbors: max_n must be at least 1");
  const std::size_t n = cloud.points.size();
  if (query_index >= n) throw BadCount("radius_neighbors: query_index out of range");

  const Vec3 q = cloud.points[query_index];
  const double r2 = r * r;
  std::vector<std::pair<double, std::size_t>> members;  // (squared distance, index)
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = squared_distance(cloud.points[i], q);
    if (d2 <= r2) members.push_back({d2, i});
  }

  if (members.size() > max_n) {
    std::sort(members.begin(), members.end());  // (distance, index) lexicographic
    members.resize(max_n);
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
  }

  NeighborSet out;
  out.query_index = query_index;
  out.radius = r;
  out.indices.reserve(max_n);
  for (const auto& m : members) out.indices.push_back(m.second);

  if (out.indices.size() < max_n) {
    out.padded = true;
    std::size_t pad = query_index;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [d2, i] : members) {
      if (i == query_index) continue;
      if (d2 < best) {  // members are index-ascending, strict keeps smallest index
        best = d2;
        pad = i;
      }
    }
    while (out.indices.size() < max_n) out.indices.push_back(pad);
  }
  return out;
}

// k nearest points including the query, distance ties to the smaller index.
// The radius field reports the k-th neighbor's distance.
inline NeighborSet knn(const PointCloud& cloud, std::size_t query_index, std::size_t k) {
  const std::size_t n = cloud.points.size();
  if (k < 1 || k > n) throw BadCount("knn: k out of range");
  if (query_index >= n) throw BadCount("knn: query_index out of range");

  const Vec3 q = cloud.points[query_index];
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(n);
  for (std::size_t i = 0; i < n; ++i) all.push_back({squared_distance(cloud.points[i], q), i});
  std::sort(all.begin(), all.end());

  NeighborSet out;
  out.query_index = query_index;
  out.radius = std::sqrt(all[k - 1].first);
  out.indices.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.indices.push_back(all[i].second);
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

}  // namespace wfa
