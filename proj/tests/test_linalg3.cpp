#include "helpers.hpp"

using namespace wfa;
using testutil::mat_close;

namespace {

Mat3 random_symmetric(Rng& rng, double extent) {
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) a(i, j) = a(j, i) = rng.uniform(-extent, extent);
  return a;
}

Mat3 reconstruct(const EigenDecomposition3& e) {
  return e.eigenvectors.m *
         Mat3::diagonal(e.eigenvalues[0], e.eigenvalues[1], e.eigenvalues[2]) *
         transpose(e.eigenvectors.m);
}

}  // namespace

TEST_CASE("sym_eig3 of a descending diagonal matrix is exact") {
  const EigenDecomposition3 e = sym_eig3(Mat3::diagonal(3, 2, 1));
  REQUIRE(e.eigenvalues[0] == 3.0);
  REQUIRE(e.eigenvalues[1] == 2.0);
  REQUIRE(e.eigenvalues[2] == 1.0);
  REQUIRE(mat_close(e.eigenvectors.m, Mat3::identity(), 0.0));
}

TEST_CASE("sym_eig3 of the zero matrix") {
  const EigenDecomposition3 e = sym_eig3(Mat3::zero());
  REQUIRE(e.eigenvalues == std::array<double, 3>{0, 0, 0});
  REQUIRE(e.gap_ratios == std::array<double, 2>{0, 0});
  REQUIRE(orthogonality_error(e.eigenvectors.m) <= 1e-15);
}

TEST_CASE("sym_eig3 recovers known factors") {
  Rng rng(Seed{21});
  for (int trial = 0; trial < 50; ++trial) {
    const Rotation3 q = uniform_rotation(rng);
    const Mat3 a = q.m * Mat3::diagonal(5, 2, 0.5) * transpose(q.m);
    const EigenDecomposition3 e = sym_eig3(a);
    REQUIRE(std::fabs(e.eigenvalues[0] - 5.0) <= 1e-10);
    REQUIRE(std::fabs(e.eigenvalues[1] - 2.0) <= 1e-10);
    REQUIRE(std::fabs(e.eigenvalues[2] - 0.5) <= 1e-10);
    REQUIRE(max_abs_diff(reconstruct(e), a) <= 1e-10);
  }
}

TEST_CASE("sym_eig3 reconstruction and ordering over random symmetric matrices") {
  Rng rng(Seed{22});
  for (int trial = 0; trial < 2000; ++trial) {
    const Mat3 a = random_symmetric(rng, 10.0);
    const EigenDecomposition3 e = sym_eig3(a);
    REQUIRE(e.eigenvalues[0] >= e.eigenvalues[1]);
    REQUIRE(e.eigenvalues[1] >= e.eigenvalues[2]);
    const double tol = 1e-9 * std::fmax(1.0, max_abs(a));
    REQUIRE(max_abs_diff(reconstruct(e), a) <= tol);
    REQUIRE(orthogonality_error(e.eigenvectors.m) <= 1e-13);
    // residual per column
    for (int k = 0; k < 3; ++k) {
      const Vec3 v = e.eigenvectors.m.col(k);
      const Vec3 res = a * v - e.eigenvalues[static_cast<std::size_t>(k)] * v;
      REQUIRE(norm(res) <= 1e-9 * std::fmax(1.0, max_abs(a)));
    }
  }
}

TEST_CASE("sym_eig3 eigenvalues are similarity invariant") {
  Rng rng(Seed{23});
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3 a = random_symmetric(rng, 5.0);
    const Rotation3 q = uniform_rotation(rng);
    const EigenDecomposition3 ea = sym_eig3(a);
    const EigenDecomposition3 eb = sym_eig3(q.m * a * transpose(q.m));
    for (int k = 0; k < 3; ++k)
      REQUIRE(std::fabs(ea.eigenvalues[static_cast<std::size_t>(k)] -
                        eb.eigenvalues[static_cast<std::size_t>(k)]) <= 1e-9);
  }
}

TEST_CASE("sym_eig3 rejects non-finite input and is deterministic") {
  Mat3 bad;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(sym_eig3(bad), NonFinite);

  Rng rng(Seed{24});
  const Mat3 a = random_symmetric(rng, 3.0);
  const EigenDecomposition3 e1 = sym_eig3(a);
  const EigenDecomposition3 e2 = sym_eig3(a);
  REQUIRE(e1.eigenvalues == e2.eigenvalues);
  REQUIRE(max_abs_diff(e1.eigenvectors.m, e2.eigenvectors.m) == 0.0);
}

TEST_CASE("svd3 of the identity") {
  const Svd3 f = svd3(Mat3::identity());
  REQUIRE(f.sigma == std::array<double, 3>{1, 1, 1});
  REQUIRE(mat_close(f.u.m, Mat3::identity(), 1e-15));
  REQUIRE(mat_close(f.v.m, Mat3::identity(), 1e-15));
}

TEST_CASE("svd3 of a rank deficient diagonal") {
  const Svd3 f = svd3(Mat3::diagonal(2, 1, 0));
  REQUIRE(std::fabs(f.sigma[0] - 2.0) <= 1e-12);
  REQUIRE(std::fabs(f.sigma[1] - 1.0) <= 1e-12);
  REQUIRE(std::fabs(f.sigma[2]) <= 1e-12);
  const Mat3 rec = f.u.m * Mat3::diagonal(f.sigma[0], f.sigma[1], f.sigma[2]) * transpose(f.v.m);
  REQUIRE(max_abs_diff(rec, Mat3::diagonal(2, 1, 0)) <= 1e-12);
}

TEST_CASE("svd3 recovers singular values from known factors") {
  Rng rng(Seed{25});
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 u0 = uniform_rotation(rng).m;
    const Mat3 v0 = uniform_rotation(rng).m;
    const double s0 = 1.0 + 4.0 * rng.uniform();
    const double s1 = s0 * rng.uniform();
    const double s2 = s1 * rng.uniform();
    const Mat3 a = u0 * Mat3::diagonal(s0, s1, s2) * transpose(v0);
    const Svd3 f = svd3(a);
    REQUIRE(std::fabs(f.sigma[0] - s0) <= 1e-10 * std::fmax(1.0, s0));
    REQUIRE(std::fabs(f.sigma[1] - s1) <= 1e-10 * std::fmax(1.0, s0));
    REQUIRE(std::fabs(f.sigma[2] - s2) <= 1e-10 * std::fmax(1.0, s0));
  }
}

TEST_CASE("svd3 of a rotation has unit singular values") {
  Rng rng(Seed{26});
  for (int trial = 0; trial < 100; ++trial) {
    const Svd3 f = svd3(uniform_rotation(rng).m);
    for (double s : f.sigma) REQUIRE(std::fabs(s - 1.0) <= 1e-10);
  }
}

TEST_CASE("svd3 reconstruction over random matrices") {
  Rng rng(Seed{27});
  for (int trial = 0; trial < 500; ++trial) {
    Mat3 a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = rng.uniform(-5, 5);
    const Svd3 f = svd3(a);
    REQUIRE(f.sigma[0] >= f.sigma[1]);
    REQUIRE(f.sigma[1] >= f.sigma[2]);
    REQUIRE(f.sigma[2] >= 0.0);
    const Mat3 rec = f.u.m * Mat3::diagonal(f.sigma[0], f.sigma[1], f.sigma[2]) * transpose(f.v.m);
    REQUIRE(max_abs_diff(rec, a) <= 1e-9 * std::fmax(1.0, max_abs(a)));
    REQUIRE(orthogonality_error(f.u.m) <= 1e-12);
    REQUIRE(orthogonality_error(f.v.m) <= 1e-12);
  }
}

TEST_CASE("svd3 rejects non-finite input") {
  Mat3 bad;
  bad(0, 2) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(svd3(bad), NonFinite);
}

TEST_CASE("det3 and matmul3 basics") {
  REQUIRE(det3(Mat3::identity()) == 1.0);
  const Mat3 rz = Mat3::from_rows({0, -1, 0}, {1, 0, 0}, {0, 0, 1});
  REQUIRE(std::fabs(det3(rz) - 1.0) <= 1e-15);
  const Mat3 prod = matmul3(rz, transpose(rz));
  REQUIRE(mat_close(prod, Mat3::identity(), 1e-15));
}

TEST_CASE("outer_accumulate sums x x^T") {
  const std::vector<Vec3> cols = {{1, 0, 0}, {0, 1, 0}};
  const Mat3 s = outer_accumulate(cols);
  REQUIRE(mat_close(s, Mat3::diagonal(1, 1, 0), 0.0));

  Rng rng(Seed{28});
  const std::vector<Vec3> pts = testutil::random_points(rng, 20);
  const Mat3 acc = outer_accumulate(pts);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(acc(i, j) == acc(j, i));  // exactly symmetric
}
