#include "helpers.hpp"

using namespace wfa;
using testutil::random_cloud;

namespace {

// Independent FPS oracle: recompute every min-distance from scratch at each
// step instead of maintaining the running array.
std::vector<std::size_t> fps_oracle(const PointCloud& cloud, std::size_t k, std::size_t start) {
  std::vector<std::size_t> picked = {start};
  while (picked.size() < k) {
    double best = -1.0;
    std::size_t best_i = cloud.size();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
      double mind = std::numeric_limits<double>::infinity();
      for (std::size_t p : picked) mind = std::fmin(mind, squared_distance(cloud.points[i], cloud.points[p]));
      if (mind > best) {
        best = mind;
        best_i = i;
      }
    }
    picked.push_back(best_i);
  }
  return picked;
}

PointCloud line_cloud(const std::vector<double>& xs) {
  PointCloud c;
  for (double x : xs) c.points.push_back({x, 0, 0});
  return c;
}

}  // namespace

TEST_CASE("farthest point sampling on collinear points with a distance tie") {
  const PointCloud c = line_cloud({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  // after 0 and 9, x=4 and x=5 tie at min-distance 4; smallest index wins
  REQUIRE(farthest_point_sample(c, 3, 0) == std::vector<std::size_t>{0, 9, 4});
}

TEST_CASE("farthest point sampling trivial cases") {
  Rng rng(Seed{31});
  const PointCloud c = random_cloud(rng, 20);
  REQUIRE(farthest_point_sample(c, 1, 7) == std::vector<std::size_t>{7});

  PointCloud cube;
  for (int i = 0; i < 8; ++i)
    cube.points.push_back({static_cast<double>((i >> 2) & 1), static_cast<double>((i >> 1) & 1),
                           static_cast<double>(i & 1)});
  const auto picked = farthest_point_sample(cube, 2, 0);
  REQUIRE(picked[0] == 0);
  REQUIRE(picked[1] == 7);  // opposite corner (1,1,1)
}

TEST_CASE("farthest point sampling matches the oracle and has no duplicates") {
  Rng rng(Seed{32});
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = random_cloud(rng, 30);
    const std::size_t k = 1 + rng.uniform_under(30);
    const std::size_t start = rng.uniform_under(30);
    const auto got = farthest_point_sample(c, k, start);
    REQUIRE(got == fps_oracle(c, k, start));
    std::vector<std::size_t> sorted = got;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("farthest point sampling rejects bad counts") {
  const PointCloud c = line_cloud({0, 1, 2});
  REQUIRE_THROWS_AS(farthest_point_sample(c, 0, 0), BadCount);
  REQUIRE_THROWS_AS(farthest_point_sample(c, 4, 0), BadCount);
  REQUIRE_THROWS_AS(farthest_point_sample(c, 2, 3), BadCount);
}

TEST_CASE("radius_neighbors pads a lone point with itself") {
  const PointCloud c = line_cloud({0});
  const NeighborSet ns = radius_neighbors(c, 0, 1.0, 4);
  REQUIRE(ns.indices == std::vector<std::size_t>{0, 0, 0, 0});
  REQUIRE(ns.padded);
}

TEST_CASE("radius_neighbors pads with the nearest non-query member") {
  const PointCloud c = line_cloud({0, 0.5, 2});
  const NeighborSet ns = radius_neighbors(c, 0, 1.0, 8);
  REQUIRE(ns.indices == std::vector<std::size_t>{0, 1, 1, 1, 1, 1, 1, 1});
  REQUIRE(ns.padded);
}

TEST_CASE("radius_neighbors keeps the nearest when over capacity") {
  const PointCloud c = line_cloud({0, 0.2, 0.4, 0.9});
  const NeighborSet ns = radius_neighbors(c, 0, 1.0, 2);
  REQUIRE(ns.indices == std::vector<std::size_t>{0, 1});
  REQUIRE_FALSE(ns.padded);
}

TEST_CASE("radius_neighbors never returns a point beyond the radius") {
  Rng rng(Seed{33});
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = random_cloud(rng, 40);
    const std::size_t q = rng.uniform_under(40);
    const double r = 0.3 + rng.uniform();
    const NeighborSet ns = radius_neighbors(c, q, r, 16);
    for (std::size_t j : ns.indices)
      REQUIRE(squared_distance(c.points[j], c.points[q]) <= r * r);
    // members form a strictly ascending prefix; padding repeats one member
    std::size_t members = 1;
    while (members < ns.indices.size() && ns.indices[members - 1] < ns.indices[members]) ++members;
    if (!ns.padded) {
      REQUIRE(members == ns.indices.size());
    } else {
      const std::size_t pad = ns.indices[members];
      REQUIRE(std::find(ns.indices.begin(), ns.indices.begin() + static_cast<long>(members), pad) !=
              ns.indices.begin() + static_cast<long>(members));
      for (std::size_t i = members; i < ns.indices.size(); ++i) REQUIRE(ns.indices[i] == pad);
    }
  }
}

TEST_CASE("radius_neighbors rejects bad arguments") {
  const PointCloud c = line_cloud({0, 1});
  REQUIRE_THROWS_AS(radius_neighbors(c, 0, 0.0, 4), BadRadius);
  REQUIRE_THROWS_AS(radius_neighbors(c, 0, -1.0, 4), BadRadius);
  REQUIRE_THROWS_AS(radius_neighbors(c, 0, 1.0, 0), BadCount);
  REQUIRE_THROWS_AS(radius_neighbors(c, 5, 1.0, 4), BadCount);
}

TEST_CASE("knn basics") {
  const PointCloud c = line_cloud({0, 1, 2, 3});
  const NeighborSet ns = knn(c, 1, 3);
  REQUIRE(ns.indices == std::vector<std::size_t>{0, 1, 2});
  REQUIRE(ns.radius == 1.0);  // distance of the 3rd nearest

  REQUIRE(knn(c, 2, 1).indices == std::vector<std::size_t>{2});
  REQUIRE(knn(c, 0, 4).indices == std::vector<std::size_t>{0, 1, 2, 3});
  REQUIRE_THROWS_AS(knn(c, 0, 5), BadCount);
  REQUIRE_THROWS_AS(knn(c, 0, 0), BadCount);
}

TEST_CASE("selection is invariant under rigid motion") {
  Rng rng(Seed{34});
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud c = random_cloud(rng, 60);
    const Rotation3 q = uniform_rotation(rng);
    const Vec3 t{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const PointCloud moved = apply_rigid(c, q, t);

    REQUIRE(farthest_point_sample(c, 12, 3) == farthest_point_sample(moved, 12, 3));
    for (std::size_t qi : {std::size_t{0}, std::size_t{17}, std::size_t{42}}) {
      const NeighborSet a = radius_neighbors(c, qi, 0.6, 12);
      const NeighborSet b = radius_neighbors(moved, qi, 0.6, 12);
      REQUIRE(a.indices == b.indices);
      REQUIRE(a.padded == b.padded);
      REQUIRE(knn(c, qi, 9).indices == knn(moved, qi, 9).indices);
    }
  }
}
