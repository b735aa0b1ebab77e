#include "helpers.hpp"

using namespace wfa;
using testutil::mat_close;
using testutil::random_cloud;
using testutil::vec_close;

namespace {

const Mat3 kRotZ90 = Mat3::from_rows({0, -1, 0}, {1, 0, 0}, {0, 0, 1});

}  // namespace

TEST_CASE("validate_rotation accepts the identity") {
  const Rotation3 r = validate_rotation(Mat3::identity(), 1e-10);
  REQUIRE(mat_close(r.m, Mat3::identity(), 0.0));
}

TEST_CASE("validate_rotation rejects reflections as NotProper") {
  REQUIRE_THROWS_AS(validate_rotation(Mat3::diagonal(1, 1, -1), 1e-10), NotProper);
}

TEST_CASE("validate_rotation accepts a 90 degree z rotation") {
  REQUIRE_NOTHROW(validate_rotation(kRotZ90, 1e-10));
}

TEST_CASE("validate_rotation rejects non-orthogonal input") {
  Mat3 m = Mat3::identity();
  m(0, 1) = 0.1;
  REQUIRE_THROWS_AS(validate_rotation(m, 1e-10), NotOrthogonal);
  REQUIRE_THROWS_AS(validate_rotation(Mat3::identity(), 0.0), Error);
  Mat3 bad = Mat3::identity();
  bad(2, 2) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(validate_rotation(bad, 1e-10), NonFinite);
}

TEST_CASE("apply_rigid with identity and zero translation is bit-identical") {
  Rng rng(Seed{11});
  const PointCloud c = random_cloud(rng, 50);
  const PointCloud out = apply_rigid(c, Rotation3{}, Vec3{});
  for (std::size_t i = 0; i < c.size(); ++i) REQUIRE(out.points[i] == c.points[i]);
}

TEST_CASE("apply_rigid rotates a point as expected") {
  PointCloud c;
  c.points.push_back({1, 0, 0});
  const PointCloud out = apply_rigid(c, Rotation3{kRotZ90}, Vec3{});
  REQUIRE(vec_close(out.points[0], {0, 1, 0}, 1e-15));
}

TEST_CASE("apply_rigid preserves all pairwise distances") {
  Rng rng(Seed{12});
  const PointCloud c = random_cloud(rng, 100);
  const Rotation3 q = uniform_rotation(rng);
  const Vec3 t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
  const PointCloud out = apply_rigid(c, q, t);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double before = distance(c.points[i], c.points[j]);
      const double after = distance(out.points[i], out.points[j]);
      REQUIRE(std::fabs(before - after) <= 1e-12);
    }
}

TEST_CASE("apply_rigid composition matches composed rotation") {
  Rng rng(Seed{13});
  const PointCloud c = random_cloud(rng, 40);
  const Rotation3 r1 = uniform_rotation(rng);
  const Rotation3 r2 = uniform_rotation(rng);
  const PointCloud two_step = apply_rigid(apply_rigid(c, r1, Vec3{}), r2, Vec3{});
  const PointCloud one_step = apply_rigid(c, Rotation3{r2.m * r1.m}, Vec3{});
  for (std::size_t i = 0; i < c.size(); ++i)
    REQUIRE(vec_close(two_step.points[i], one_step.points[i], 1e-12));
}

TEST_CASE("apply_rigid rotates normals but does not translate them") {
  PointCloud c;
  c.points.push_back({2, 2, 2});
  c.normals = std::vector<Vec3>{{0, 0, 1}};
  const PointCloud out = apply_rigid(c, Rotation3{kRotZ90}, Vec3{5, 5, 5});
  REQUIRE(vec_close((*out.normals)[0], {0, 0, 1}, 1e-15));
  REQUIRE(vec_close(out.points[0], {3, 7, 7}, 1e-15));
}

TEST_CASE("validate_cloud enforces the invariants") {
  PointCloud empty;
  REQUIRE_THROWS_AS(validate_cloud(empty), Error);

  PointCloud c;
  c.points.push_back({0, 0, 0});
  REQUIRE_NOTHROW(validate_cloud(c));

  c.normals = std::vector<Vec3>{};
  REQUIRE_THROWS_AS(validate_cloud(c), ShapeMismatch);

  c.normals = std::vector<Vec3>{{0.5, 0, 0}};
  REQUIRE_THROWS_AS(validate_cloud(c), Error);

  c.normals = std::vector<Vec3>{{1, 0, 0}};
  REQUIRE_NOTHROW(validate_cloud(c));

  c.points[0].x = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(validate_cloud(c), NonFinite);
}
