#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "wfa/alignment.hpp"
#include "wfa/error.hpp"
#include "wfa/geometry.hpp"
#include "wfa/linalg3.hpp"
#include "wfa/rng.hpp"
#include "wfa/rotations.hpp"

namespace wfa {

// Source index k -> target index pi[k] plus the matching squared distances.
struct CorrespondenceMap {
  std::vector<std::size_t> pi;
  std::vector<double> sq_distances;

  double total_cost() const {
    double s = 0.0;
    for (double d : sq_distances) s += d;
    return s;
  }
};

struct AlignmentResult {
  OrthogonalFrame r;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
};

namespace detail {

inline double corresponded_cost(std::span<const Vec3> source, std::span<const Vec3> target,
                                const Mat3& r) {
  double cost = 0.0;
  for (std::size_t k = 0; k < source.size(); ++k)
    cost += squared_distance(target[k], r * source[k]);
  return cost;
}

}  // namespace detail

// Orthogonal Procrustes for pre-centered, column-paired sets: maximizes
// tr(R source target^T) via the SVD of H = source target^T, R = V_H U_H^T.
// The plain solution may reflect; force_proper flips the V_H column paired
// with the smallest singular value to push the result into SO(3).
inline AlignmentResult kabsch(std::span<const Vec3> source, std::span<const Vec3> target,
                              bool force_proper = false) {
  if (source.size() != target.size()) throw ShapeMismatch("kabsch: source/target sizes differ");
  if (source.size() < 3) throw TooFewPoints("kabsch: need at least 3 points");

  Mat3 h = Mat3::zero();
  for (std::size_t k = 0; k < source.size(); ++k) h += outer(source[k], target[k]);

  const Svd3 f = svd3(h);
  Mat3 v = f.v.m;
  if (force_proper && det3(v * transpose(f.u.m)) < 0.0) v.set_col(2, -v.col(2));
  const Mat3 r = v * transpose(f.u.m);

  AlignmentResult out;
  out.r = OrthogonalFrame{r};
  out.cost = detail::corresponded_cost(source, target, r);
  out.iterations = 1;
  return out;
}

// For each source point, the target index nearest to r * source_k; distance
// ties go to the smaller index.
inline CorrespondenceMap nearest_correspondence(std::span<const Vec3> source,
                                                std::span<const Vec3> target,
                                                const OrthogonalFrame& r) {
  if (source.empty() || target.empty())
    throw TooFewPoints("nearest_correspondence: both sets must be non-empty");

  CorrespondenceMap cm;
  cm.pi.reserve(source.size());
  cm.sq_distances.reserve(source.size());
  for (const Vec3& s : source) {
    const Vec3 ts = r.m * s;
    std::size_t best_i = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double d2 = squared_distance(target[i], ts);
      if (d2 < best) {  // strict: smallest index wins ties
        best = d2;
        best_i = i;
      }
    }
    cm.pi.push_back(best_i);
    cm.sq_distances.push_back(best);
  }
  return cm;
}

// Point-to-point ICP (rotation only, both sets assumed pre-centered):
// alternate nearest correspondences with a Procrustes refit until the
// relative cost improvement drops below cost_tol or max_iters passes. The
// cost sequence is non-increasing; cost_history (when given) records the
// initial cost followed by the cost after each iteration.
inline AlignmentResult icp(std::span<const Vec3> source, std::span<const Vec3> target,
                           int max_iters, double cost_tol,
                           const OrthogonalFrame& initial = {},
                           std::vector<double>* cost_history = nullptr) {
  if (source.size() < 3 || target.size() < 3) throw TooFewPoints("icp: need at least 3 points");
  if (max_iters < 1) throw BadCount("icp: max_iters must be at least 1");

  OrthogonalFrame r = initial;
  CorrespondenceMap cm = nearest_correspondence(source, target, r);
  double cost = cm.total_cost();
  if (cost_history) cost_history->push_back(cost);

  int iters = 0;
  std::vector<Vec3> matched(source.size());
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t k = 0; k < source.size(); ++k) matched[k] = target[cm.pi[k]];
    r = kabsch(source, matched).r;
    cm = nearest_correspondence(source, target, r);
    const double new_cost = cm.total_cost();
    ++iters;
    if (cost_history) cost_history->push_back(new_cost);
    const double improvement = cost - new_cost;
    cost = new_cost;
    if (improvement < cost_tol * std::fmax(cost, 1e-300)) break;
  }

  AlignmentResult out;
  out.r = r;
  out.cost = cost;
  out.iterations = iters;
  return out;
}

// Exhaustive baseline for the fixed-correspondence problem: evaluate the
// paired squared-residual cost at num_samples Haar-uniform rotations plus
// the identity and keep the best. Deterministic per seed.
inline AlignmentResult brute_force_best_rotation(std::span<const Vec3> source,
                                                 std::span<const Vec3> target, int num_samples,
                                                 Seed seed) {
  if (source.size() != target.size())
    throw ShapeMismatch("brute_force_best_rotation: source/target sizes differ");

  Mat3 best_r = Mat3::identity();
  double best = detail::corresponded_cost(source, target, best_r);
  Rng rng(seed);
  for (int i = 0; i < num_samples; ++i) {
    const Rotation3 q = uniform_rotation(rng);
    const double c = detail::corresponded_cost(source, target, q.m);
    if (c < best) {
      best = c;
      best_r = q.m;
    }
  }
  AlignmentResult out;
  out.r = OrthogonalFrame{best_r};
  out.cost = best;
  out.iterations = num_samples;
  return out;
}

struct RegistrationCheckConfig {
  WfaConfig wfa;
  int num_samples = 2000;  // rotations sampled for the independent search
  Seed seed{0};
  int icp_max_iters = 50;
  double icp_cost_tol = 1e-12;
};

// Empirical check of the registration claim: how close the alignment
// rotation comes to minimizing the nearest-neighbor objective
// sum_k min_i |w_centered_i - R x_k|^2. Exact optimality rests on a
// distributional assumption, so the gap is reported, not asserted zero.
struct RegistrationCheckReport {
  Mat3 r_wfa;
  double objective_wfa = 0.0;      // objective at the alignment rotation
  double objective_icp = 0.0;      // after ICP refinement started there
  double objective_sampled = 0.0;  // best over the sampled rotations
  double best_objective = 0.0;
  double gap = 0.0;                // objective_wfa - best_objective, >= 0
  std::size_t neighborhood_size = 0;
  std::size_t weight_count = 0;
  bool degenerate = false;
  bool ambiguous_local = false;
  bool ambiguous_weight = false;
};

inline RegistrationCheckReport verify_registration_optimality(
    const PointCloud& cloud, const NeighborSet& neighbors, const LayerWeights& weights,
    const RegistrationCheckConfig& cfg = {}) {
  const WeightFrame wf = weight_frame(weights, cfg.wfa.sign_tol, cfg.wfa.rank_tol);
  const LocalFrame lf = local_frame(cloud, neighbors, cfg.wfa.sign_tol, cfg.wfa.gap_tol);
  const OrthogonalFrame r_wfa = alignment_rotation(wf, lf, cfg.wfa.order);

  std::vector<Vec3> x;
  x.reserve(neighbors.indices.size());
  for (std::size_t j : neighbors.indices) x.push_back(cloud.points[j] - lf.barycenter);
  const std::vector<Vec3> wt = centered_weights(weights);

  const auto objective = [&](const OrthogonalFrame& r) {
    return nearest_correspondence(x, wt, r).total_cost();
  };

  RegistrationCheckReport rep;
  rep.r_wfa = r_wfa.m;
  rep.objective_wfa = objective(r_wfa);
  rep.objective_icp = icp(x, wt, cfg.icp_max_iters, cfg.icp_cost_tol, r_wfa).cost;

  Rng rng(cfg.seed);
  double best_sampled = objective(OrthogonalFrame{});
  for (int i = 0; i < cfg.num_samples; ++i) {
    const Rotation3 q = uniform_rotation(rng);
    const double c = objective(OrthogonalFrame{q.m});
    if (c < best_sampled) best_sampled = c;
  }
  rep.objective_sampled = best_sampled;

  rep.best_objective = rep.objective_wfa;
  if (rep.objective_icp < rep.best_objective) rep.best_objective = rep.objective_icp;
  if (rep.objective_sampled < rep.best_objective) rep.best_objective = rep.objective_sampled;
  rep.gap = rep.objective_wfa - rep.best_objective;

  rep.neighborhood_size = neighbors.indices.size();
  rep.weight_count = weights.w.size();
  rep.degenerate = lf.degenerate;
  rep.ambiguous_local = lf.any_ambiguous();
  rep.ambiguous_weight = wf.any_ambiguous();
  return rep;
}

}  // namespace wfa
