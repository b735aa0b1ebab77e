#include "helpers.hpp"

using namespace wfa;
using testutil::rotate_all;
using testutil::centered;
using testutil::mat_close;
using testutil::random_points;

namespace {

double trace_of(const Mat3& a) { return a(0, 0) + a(1, 1) + a(2, 2); }

Mat3 cross_covariance(const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
  Mat3 h = Mat3::zero();
  for (std::size_t k = 0; k < x.size(); ++k) h += outer(x[k], y[k]);
  return h;
}

}  // namespace

TEST_CASE("kabsch of a set against itself is the identity") {
  Rng rng(Seed{51});
  const std::vector<Vec3> x = centered(random_points(rng, 12));
  const AlignmentResult res = kabsch(x, x);
  REQUIRE(mat_close(res.r.m, Mat3::identity(), 1e-10));
  REQUIRE(res.cost <= 1e-18 * 12.0);
}

TEST_CASE("kabsch exactly recovers a noiseless rotation") {
  Rng rng(Seed{52});
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<Vec3> x = centered(random_points(rng, 10));
    const Rotation3 q = uniform_rotation(rng);
    const AlignmentResult res = kabsch(x, rotate_all(q.m, x));
    REQUIRE(max_abs_diff(res.r.m, q.m) <= 1e-9);
  }
}

TEST_CASE("kabsch on a planar set recovers the registration cost") {
  Rng rng(Seed{53});
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> x = random_points(rng, 10);
    for (Vec3& p : x) p.z = 0.0;  // rank 2
    x = centered(x);
    const Rotation3 q = uniform_rotation(rng);
    const AlignmentResult res = kabsch(x, rotate_all(q.m, x));
    REQUIRE(res.cost <= 1e-16);
  }
}

TEST_CASE("kabsch rejects too few points") {
  const std::vector<Vec3> two = {{1, 0, 0}, {0, 1, 0}};
  REQUIRE_THROWS_AS(kabsch(two, two), TooFewPoints);
  const std::vector<Vec3> three = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  REQUIRE_THROWS_AS(kabsch(three, two), ShapeMismatch);
}

TEST_CASE("kabsch reflection handling is a caller flag") {
  Rng rng(Seed{54});
  const std::vector<Vec3> x = centered(random_points(rng, 10));
  const Mat3 reflect = Mat3::diagonal(1, 1, -1);
  const std::vector<Vec3> y = rotate_all(reflect, x);

  const AlignmentResult plain = kabsch(x, y);
  REQUIRE(det3(plain.r.m) < 0.0);  // default matches the closed form: reflections allowed
  REQUIRE(plain.cost <= 1e-16);

  const AlignmentResult proper = kabsch(x, y, true);
  REQUIRE(det3(proper.r.m) > 0.0);
  REQUIRE(proper.cost >= plain.cost);
}

TEST_CASE("kabsch trace optimality against sampled orthogonal matrices") {
  Rng rng(Seed{55});
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<Vec3> x = centered(random_points(rng, 8));
    const std::vector<Vec3> y = centered(random_points(rng, 8));
    const Mat3 h = cross_covariance(x, y);
    const double best = trace_of(kabsch(x, y).r.m * h);
    double scale = 0.0;
    for (const Vec3& p : x) scale += squared_norm(p);
    for (const Vec3& p : y) scale += squared_norm(p);
    for (int s = 0; s < 500; ++s) {
      Mat3 q = uniform_rotation(rng).m;
      REQUIRE(best >= trace_of(q * h) - 1e-10 * scale);
      q.set_col(2, -q.col(2));  // reflecting candidates too
      REQUIRE(best >= trace_of(q * h) - 1e-10 * scale);
    }
  }
}

TEST_CASE("kabsch is left-equivariant") {
  Rng rng(Seed{56});
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Vec3> x = centered(random_points(rng, 9));
    const std::vector<Vec3> y = centered(random_points(rng, 9));
    const Rotation3 q = uniform_rotation(rng);
    const Mat3 lhs = kabsch(x, rotate_all(q.m, y)).r.m;
    const Mat3 rhs = q.m * kabsch(x, y).r.m;
    REQUIRE(max_abs_diff(lhs, rhs) <= 1e-9);
  }
}

TEST_CASE("nearest_correspondence finds exact matches and ties by index") {
  Rng rng(Seed{57});
  const std::vector<Vec3> x = random_points(rng, 15);
  const Rotation3 q = uniform_rotation(rng);
  const CorrespondenceMap cm = nearest_correspondence(x, rotate_all(q.m, x), OrthogonalFrame{q.m});
  for (std::size_t k = 0; k < x.size(); ++k) {
    REQUIRE(cm.pi[k] == k);
    REQUIRE(cm.sq_distances[k] <= 1e-28);
  }

  const std::vector<Vec3> origin = {{0, 0, 0}};
  const std::vector<Vec3> targets = {{3, 0, 0}, {1, 1, 0}, {0.5, 0, 0}};
  REQUIRE(nearest_correspondence(origin, targets, OrthogonalFrame{}).pi[0] == 2);

  // exact tie between indices 0 and 1
  const std::vector<Vec3> tied = {{1, 0, 0}, {-1, 0, 0}};
  REQUIRE(nearest_correspondence(origin, tied, OrthogonalFrame{}).pi[0] == 0);
}

TEST_CASE("nearest_correspondence matches a brute-force double loop") {
  Rng rng(Seed{58});
  const std::vector<Vec3> x = random_points(rng, 20);
  const std::vector<Vec3> y = random_points(rng, 13);
  const Rotation3 q = uniform_rotation(rng);
  const CorrespondenceMap cm = nearest_correspondence(x, y, OrthogonalFrame{q.m});
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::size_t best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = squared_distance(y[i], q.m * x[k]);
      if (d < bestd) {
        bestd = d;
        best = i;
      }
    }
    REQUIRE(cm.pi[k] == best);
    REQUIRE(cm.sq_distances[k] == bestd);
  }
}

TEST_CASE("icp converges immediately on identical sets") {
  Rng rng(Seed{59});
  const std::vector<Vec3> x = centered(random_points(rng, 12));
  const AlignmentResult res = icp(x, x, 20, 1e-12);
  REQUIRE(res.iterations == 1);
  REQUIRE(mat_close(res.r.m, Mat3::identity(), 1e-10));
  REQUIRE(res.cost <= 1e-24);
}

TEST_CASE("icp recovers small rotations exactly") {
  Rng rng(Seed{60});
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Vec3> x = centered(random_points(rng, 40));
    // rotation of at most 20 degrees about a random axis
    Vec3 axis{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    axis = axis / norm(axis);
    const double angle = rng.uniform(0.0, 20.0 * 3.14159265358979323846 / 180.0);
    detail::Quaternion quat;
    quat.w = std::cos(angle / 2);
    quat.x = axis.x * std::sin(angle / 2);
    quat.y = axis.y * std::sin(angle / 2);
    quat.z = axis.z * std::sin(angle / 2);
    const Mat3 q = detail::quaternion_to_matrix(quat);

    std::vector<double> history;
    const AlignmentResult res = icp(x, rotate_all(q, x), 10, 1e-14, OrthogonalFrame{}, &history);
    REQUIRE(max_abs_diff(res.r.m, q) <= 1e-6);
    REQUIRE(res.iterations <= 10);
  }
}

TEST_CASE("icp cost history is non-increasing") {
  Rng rng(Seed{61});
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Vec3> x = centered(random_points(rng, 15));
    const std::vector<Vec3> y = centered(random_points(rng, 18));
    std::vector<double> history;
    icp(x, y, 30, 1e-12, OrthogonalFrame{}, &history);
    REQUIRE(history.size() >= 2);
    for (std::size_t i = 1; i < history.size(); ++i)
      REQUIRE(history[i] <= history[i - 1] + 1e-12 * std::fmax(1.0, history[0]));
  }
}

TEST_CASE("icp rejects too few points") {
  const std::vector<Vec3> two = {{1, 0, 0}, {0, 1, 0}};
  REQUIRE_THROWS_AS(icp(two, two, 5, 1e-9), TooFewPoints);
}

TEST_CASE("brute force rotation search basics") {
  Rng rng(Seed{62});
  const std::vector<Vec3> x = centered(random_points(rng, 8));
  const std::vector<Vec3> y = centered(random_points(rng, 8));

  const AlignmentResult none = brute_force_best_rotation(x, y, 0, Seed{5});
  REQUIRE(mat_close(none.r.m, Mat3::identity(), 0.0));

  const AlignmentResult a = brute_force_best_rotation(x, y, 500, Seed{5});
  const AlignmentResult b = brute_force_best_rotation(x, y, 500, Seed{5});
  REQUIRE(a.cost == b.cost);
  REQUIRE(max_abs_diff(a.r.m, b.r.m) == 0.0);
  REQUIRE(a.cost <= none.cost);
}

TEST_CASE("kabsch cost lower-bounds the sampled search") {
  Rng rng(Seed{63});
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Vec3> x = centered(random_points(rng, 10));
    const std::vector<Vec3> y = centered(random_points(rng, 10));
    const AlignmentResult kab = kabsch(x, y);
    const AlignmentResult bf =
        brute_force_best_rotation(x, y, 2000, derive_seed(Seed{63}, trial));
    double scale2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
      scale2 += squared_norm(x[k]) + squared_norm(y[k]);
    scale2 /= static_cast<double>(x.size());
    REQUIRE(kab.cost <= bf.cost + 1e-10 * scale2);
  }
}

namespace {

// Clean random neighborhood: non-degenerate local frame whose sign-rule
// projections all carry a comfortable margin.
struct CleanNeighborhood {
  PointCloud cloud;
  NeighborSet ns;
  LocalFrame lf;
};

CleanNeighborhood make_clean_neighborhood(Rng& rng, std::size_t n) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    CleanNeighborhood out;
    out.cloud.points = random_points(rng, n);
    out.ns = knn(out.cloud, 0, n);
    out.lf = local_frame(out.cloud, out.ns);
    if (out.lf.degenerate) continue;
    const Vec3 ref = out.cloud.points[0] - out.lf.barycenter;
    const double refn = norm(ref);
    if (refn < 1e-6) continue;
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k)
      if (std::fabs(dot(out.lf.v.m.col(k), ref)) < 1e-3 * refn) ok = false;
    if (ok) return out;
  }
  throw std::runtime_error("no clean neighborhood found");
}

LayerWeights rotated_copy_weights(const CleanNeighborhood& cn, const Mat3& q) {
  // rotated copy of the centered neighborhood, translated so the two sign
  // rules agree: w_bar = -q (p_query - barycenter)
  const Vec3 ref = cn.cloud.points[0] - cn.lf.barycenter;
  const Vec3 offset = -(q * ref);
  LayerWeights lw;
  for (std::size_t j : cn.ns.indices)
    lw.w.push_back(q * (cn.cloud.points[j] - cn.lf.barycenter) + offset);
  lw.bias.assign(lw.w.size(), 0.0);
  return lw;
}

}  // namespace

TEST_CASE("verify_registration_optimality: rotated-copy weights register exactly") {
  Rng rng(Seed{64});
  for (int trial = 0; trial < 10; ++trial) {
    const CleanNeighborhood cn = make_clean_neighborhood(rng, 16);
    const Rotation3 q = uniform_rotation(rng);
    const LayerWeights lw = rotated_copy_weights(cn, q.m);

    RegistrationCheckConfig cfg;
    cfg.num_samples = 500;
    cfg.seed = derive_seed(Seed{64}, trial);
    const RegistrationCheckReport rep =
      verify_registration_optimality(cn.cloud, cn.ns, lw, cfg);
    REQUIRE(rep.objective_wfa <= 1e-9);
    REQUIRE(rep.gap <= 1e-9);
    REQUIRE(max_abs_diff(rep.r_wfa, q.m) <= 1e-9);
  }
}

TEST_CASE("verify_registration_optimality: identity-copy weights recover the identity") {
  Rng rng(Seed{65});
  const CleanNeighborhood cn = make_clean_neighborhood(rng, 16);
  const LayerWeights lw = rotated_copy_weights(cn, Mat3::identity());
  const RegistrationCheckReport rep = verify_registration_optimality(cn.cloud, cn.ns, lw);
  REQUIRE(max_abs_diff(rep.r_wfa, Mat3::identity()) <= 1e-9);
  REQUIRE(rep.gap <= 1e-9);
}

TEST_CASE("verify_registration_optimality: structural report on random inputs") {
  Rng rng(Seed{66});
  PointCloud cloud;
  cloud.points = random_points(rng, 20);
  const NeighborSet ns = knn(cloud, 0, 16);
  const LayerWeights lw = random_layer_weights(Seed{661}, 16);
  RegistrationCheckConfig cfg;
  cfg.num_samples = 200;
  const RegistrationCheckReport rep = verify_registration_optimality(cloud, ns, lw, cfg);
  REQUIRE(std::isfinite(rep.objective_wfa));
  REQUIRE(rep.gap >= 0.0);
  REQUIRE(rep.best_objective <= rep.objective_wfa);
  REQUIRE(rep.objective_icp <= rep.objective_wfa + 1e-12);
  REQUIRE(rep.neighborhood_size == 16);
  REQUIRE(rep.weight_count == 16);
}
