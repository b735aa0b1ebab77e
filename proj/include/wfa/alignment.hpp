#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wfa/error.hpp"
#include "wfa/geometry.hpp"
#include "wfa/linalg3.hpp"
#include "wfa/matrix.hpp"
#include "wfa/rng.hpp"
#include "wfa/sampling.hpp"

namespace wfa {

// Which local principal axis feeds each weight axis: v_column[k] is the
// index of the local eigenvector paired with weight eigenvector u_k. The
// identity order pairs axes by descending eigenvalue; the reversed order
// pairs the largest local axis with the smallest weight axis.
struct AxisOrder {
  std::array<int, 3> v_column = {0, 1, 2};

  static AxisOrder identity() { return {}; }
  static AxisOrder reversed() { return {{2, 1, 0}}; }

  static std::array<AxisOrder, 6> all() {
    return {AxisOrder{{0, 1, 2}}, AxisOrder{{0, 2, 1}}, AxisOrder{{1, 0, 2}},
            AxisOrder{{1, 2, 0}}, AxisOrder{{2, 0, 1}}, AxisOrder{{2, 1, 0}}};
  }

  // "123" pairs v1->u1, v2->u2, v3->u3; "321" is the reversed order.
  static AxisOrder from_string(std::string_view s) {
    if (s.size() != 3) throw Error("axis order must be a permutation of \"123\"");
    AxisOrder o;
    bool seen[3] = {false, false, false};
    for (int k = 0; k < 3; ++k) {
      const char c = s[static_cast<std::size_t>(k)];
      if (c < '1' || c > '3') throw Error("axis order must be a permutation of \"123\"");
      const int idx = c - '1';
      if (seen[idx]) throw Error("axis order must be a permutation of \"123\"");
      seen[idx] = true;
      o.v_column[static_cast<std::size_t>(k)] = idx;
    }
    return o;
  }

  std::string to_string() const {
    std::string s(3, '0');
    for (int k = 0; k < 3; ++k) s[static_cast<std::size_t>(k)] = static_cast<char>('1' + v_column[static_cast<std::size_t>(k)]);
    return s;
  }

  bool operator==(const AxisOrder& o) const { return v_column == o.v_column; }
};

// Tolerances of the frame construction. Axes whose sign-rule projection is
// below sign_tol (relative) are flagged ambiguous instead of silently
// disambiguated; frames whose eigenvalue gap ratios fall below gap_tol are
// flagged degenerate. Flagged frames still compute deterministically, but
// rotation invariance is not guaranteed for them.
struct WfaConfig {
  double sign_tol = 1e-6;
  double gap_tol = 1e-3;
  double rank_tol = 1e-9;
  AxisOrder order;
};

// First-layer weights seen as a cloud of d points in R^3 (columns w_k) plus
// the layer bias.
struct LayerWeights {
  std::vector<Vec3> w;
  std::vector<double> bias;
};

inline Vec3 weight_barycenter(const LayerWeights& weights) {
  Vec3 s{};
  for (const Vec3& c : weights.w) s += c;
  return s / static_cast<double>(weights.w.size());
}

inline std::vector<Vec3> centered_weights(const LayerWeights& weights) {
  const Vec3 wbar = weight_barycenter(weights);
  std::vector<Vec3> out;
  out.reserve(weights.w.size());
  for (const Vec3& c : weights.w) out.push_back(c - wbar);
  return out;
}

struct WeightFrame {
  OrthogonalFrame u;
  std::array<double, 3> eigenvalues{};
  Vec3 w_bar{};
  std::array<bool, 3> ambiguous = {false, false, false};

  bool any_ambiguous() const { return ambiguous[0] || ambiguous[1] || ambiguous[2]; }
};

struct LocalFrame {
  OrthogonalFrame v;
  std::array<double, 3> eigenvalues{};
  Vec3 barycenter{};
  bool degenerate = false;
  std::array<bool, 3> ambiguous = {false, false, false};

  bool any_ambiguous() const { return ambiguous[0] || ambiguous[1] || ambiguous[2]; }
  bool clean() const { return !degenerate && !any_ambiguous(); }
};

// The per-query alignment: rotation r and the rotated centered neighborhood
// coordinates, column j = r (p_j - barycenter).
struct AlignedNeighborhood {
  OrthogonalFrame r;
  std::vector<Vec3> aligned;
  NeighborSet source;
  LocalFrame frame;
};

// Principal axes of the centered weight cloud, signs chosen so the vector
// -w_bar lands in the frame's first quadrant. Axes whose projection onto
// w_bar is below sign_tol * |w_bar| keep the eigensolver's fallback sign and
// are flagged; a near-zero barycenter (|w_bar| < sign_tol) leaves no usable
// sign reference, so every axis is flagged.
inline WeightFrame weight_frame(const LayerWeights& weights, double sign_tol = 1e-6,
                                double rank_tol = 1e-9) {
  const std::size_t d = weights.w.size();
  if (d < 3) throw RankDeficientWeights("weight_frame: need at least 3 weight columns");

  const Vec3 wbar = weight_barycenter(weights);
  std::vector<Vec3> centered;
  centered.reserve(d);
  for (const Vec3& c : weights.w) centered.push_back(c - wbar);

  const EigenDecomposition3 eig = sym_eig3(outer_accumulate(centered));
  if (eig.eigenvalues[1] < rank_tol)
    throw RankDeficientWeights("weight_frame: centered weights have rank < 2");

  WeightFrame out;
  out.u = eig.eigenvectors;
  out.eigenvalues = eig.eigenvalues;
  out.w_bar = wbar;

  const double wn = norm(wbar);
  if (wn < sign_tol) {
    out.ambiguous = {true, true, true};
    return out;
  }
  for (int k = 0; k < 3; ++k) {
    const double proj = dot(out.u.m.col(k), wbar);
    if (std::fabs(proj) < sign_tol * wn)
      out.ambiguous[static_cast<std::size_t>(k)] = true;
    else if (proj > 0.0)  // flip so u_k^T (-w_bar) >= 0
      out.u.m.set_col(k, -out.u.m.col(k));
  }
  return out;
}

// Principal axes of the centered neighborhood (padded duplicates included in
// both barycenter and covariance), signs chosen so (p_query - barycenter)
// lands in the first quadrant. Degeneracy is a flag, not an error: flagged
// frames still compute, downstream invariance checks exclude them.
inline LocalFrame local_frame(const PointCloud& cloud, const NeighborSet& neighbors,
                              double sign_tol = 1e-6, double gap_tol = 1e-3) {
  if (neighbors.indices.size() < 3)
    throw BadCount("local_frame: need at least 3 neighbors (after padding)");
  const std::size_t n = cloud.points.size();
  if (neighbors.query_index >= n) throw BadCount("local_frame: query index out of range");

  Vec3 bary{};
  for (std::size_t j : neighbors.indices) {
    if (j >= n) throw BadCount("local_frame: neighbor index out of range");
    bary += cloud.points[j];
  }
  bary = bary / static_cast<double>(neighbors.indices.size());

  std::vector<Vec3> centered;
  centered.reserve(neighbors.indices.size());
  for (std::size_t j : neighbors.indices) centered.push_back(cloud.points[j] - bary);

  const EigenDecomposition3 eig = sym_eig3(outer_accumulate(centered));

  LocalFrame out;
  out.v = eig.eigenvectors;
  out.eigenvalues = eig.eigenvalues;
  out.barycenter = bary;
  out.degenerate = eig.gap_ratios[0] < gap_tol || eig.gap_ratios[1] < gap_tol;

  const Vec3 ref = cloud.points[neighbors.query_index] - bary;
  const double refn = norm(ref);
  for (int k = 0; k < 3; ++k) {
    const double proj = dot(out.v.m.col(k), ref);
    if (std::fabs(proj) < sign_tol * std::fmax(refn, 1e-300))
      out.ambiguous[static_cast<std::size_t>(k)] = true;
    else if (proj < 0.0)  // flip so v_k^T (p_query - barycenter) >= 0
      out.v.m.set_col(k, -out.v.m.col(k));
  }
  return out;
}

// R = sum_k u_k v_{order[k]}^T: carries the selected local axis onto each
// weight axis. Orthogonal by construction; the sign rules fix each column
// independently, so the determinant may be -1.
inline OrthogonalFrame alignment_rotation(const WeightFrame& wf, const LocalFrame& lf,
                                          const AxisOrder& order = {}) {
  Mat3 r = Mat3::zero();
  for (int k = 0; k < 3; ++k)
    r += outer(wf.u.m.col(k), lf.v.m.col(order.v_column[static_cast<std::size_t>(k)]));
  return OrthogonalFrame{r};
}

inline AlignedNeighborhood align_neighborhood(const PointCloud& cloud, const NeighborSet& neighbors,
                                              const WeightFrame& wf, const WfaConfig& cfg = {}) {
  AlignedNeighborhood out;
  out.frame = local_frame(cloud, neighbors, cfg.sign_tol, cfg.gap_tol);
  out.r = alignment_rotation(wf, out.frame, cfg.order);
  out.source = neighbors;
  out.aligned.reserve(neighbors.indices.size());
  for (std::size_t j : neighbors.indices)
    out.aligned.push_back(out.r.m * (cloud.points[j] - out.frame.barycenter));
  return out;
}

// Normals ride along into the aligned frame: n -> r n. Norms are preserved.
inline std::vector<Vec3> project_normals(std::span<const Vec3> normals, const OrthogonalFrame& r) {
  std::vector<Vec3> out;
  out.reserve(normals.size());
  for (const Vec3& n : normals) out.push_back(r.m * n);
  return out;
}

// y = W_centered^T X + b with the bias broadcast per column. Output is
// d x n. Accepts any column count d >= 1; the frame construction above is
// what demands rank.
inline Matrix feature_layer(std::span<const Vec3> columns, const LayerWeights& weights) {
  const std::size_t d = weights.w.size();
  if (d < 1) throw ShapeMismatch("feature_layer: empty weight matrix");
  if (weights.bias.size() != d) throw ShapeMismatch("feature_layer: bias size does not match weight columns");

  const Vec3 wbar = weight_barycenter(weights);
  Matrix y(d, columns.size());
  for (std::size_t k = 0; k < d; ++k) {
    const Vec3 wc = weights.w[k] - wbar;
    const double b = weights.bias[k];
    for (std::size_t j = 0; j < columns.size(); ++j) y(k, j) = dot(wc, columns[j]) + b;
  }
  return y;
}

inline Matrix wfa_feature_layer(const AlignedNeighborhood& an, const LayerWeights& weights) {
  return feature_layer(an.aligned, weights);
}

// Uniform [-scale, scale] weight entries and biases; handy for the
// invariance sweeps, which need a fresh layer per trial.
inline LayerWeights random_layer_weights(Seed seed, std::size_t d, double scale = 0.5) {
  if (d < 3) throw RankDeficientWeights("random_layer_weights: need at least 3 columns");
  Rng rng(seed);
  LayerWeights lw;
  lw.w.reserve(d);
  lw.bias.reserve(d);
  for (std::size_t k = 0; k < d; ++k)
    lw.w.push_back({rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)});
  for (std::size_t k = 0; k < d; ++k) lw.bias.push_back(rng.uniform(-scale, scale));
  return lw;
}

}  // namespace wfa
