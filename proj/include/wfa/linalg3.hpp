#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>

#include "wfa/error.hpp"
#include "wfa/geometry.hpp"
#include "wfa/mat3.hpp"
#include "wfa/vec3.hpp"

namespace wfa {

struct EigenDecomposition3 {
  std::array<double, 3> eigenvalues{};  // descending
  OrthogonalFrame eigenvectors;         // column k pairs with eigenvalues[k]
  // ((l1-l2)/max(l1,eps), (l2-l3)/max(l1,eps)); small ratios mean the basis
  // is close to non-unique and callers should treat the frame as degenerate.
  std::array<double, 2> gap_ratios{};
};

struct Svd3 {
  OrthogonalFrame u;
  std::array<double, 3> sigma{};  // non-negative, descending
  OrthogonalFrame v;
};

namespace detail {

inline double jacobi_sign(double d) { return d < 0.0 ? -1.0 : 1.0; }

// Flip each eigenvector column so its largest-magnitude component is
// positive. This is the deterministic fallback sign; the alignment stage
// re-disambiguates with the first-quadrant rules.
inline void canonicalize_column_signs(Mat3& v) {
  for (int c = 0; c < 3; ++c) {
    int big = 0;
    for (int r = 1; r < 3; ++r)
      if (std::fabs(v(r, c)) > std::fabs(v(big, c))) big = r;
    if (v(big, c) < 0.0)
      for (int r = 0; r < 3; ++r) v(r, c) = -v(r, c);
  }
}

}  // namespace detail

// Symmetric eigendecomposition via cyclic Jacobi sweeps. Jacobi is
// branch-stable and keeps full accuracy near eigenvalue ties, which local
// PCA hits on symmetric neighborhoods. Input is symmetrized by averaging
// with its transpose; sweeps run until every off-diagonal is below
// 1e-14 * max|A| or 50 sweeps have passed.
inline EigenDecomposition3 sym_eig3(const Mat3& a_in) {
  if (!is_finite(a_in)) throw NonFinite("sym_eig3: non-finite entry");

  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = 0.5 * (a_in(i, j) + a_in(j, i));

  const double scale = max_abs(a);
  Mat3 v = Mat3::identity();

  if (scale > 0.0) {
    const double off_tol = 1e-14 * scale;
    constexpr int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int sweep = 0; sweep < 50; ++sweep) {
      const double off = std::fmax(std::fabs(a(0, 1)), std::fmax(std::fabs(a(0, 2)), std::fabs(a(1, 2))));
      if (off <= off_tol) break;
      for (const auto& pq : pairs) {
        const int p = pq[0], q = pq[1];
        const double apq = a(p, q);
        if (std::fabs(apq) <= off_tol) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = detail::jacobi_sign(theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double app = a(p, p), aqq = a(q, q);
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        for (int r = 0; r < 3; ++r) {
          if (r != p && r != q) {
            const double arp = a(r, p), arq = a(r, q);
            a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
            a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
          }
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  double lambda[3] = {a(0, 0), a(1, 1), a(2, 2)};
  int order[3] = {0, 1, 2};
  // descending; equal values keep index order so ties resolve deterministically
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (lambda[order[j]] > lambda[order[i]]) {
        const int tmp = order[i];
        order[i] = order[j];
        order[j] = tmp;
      }

  EigenDecomposition3 out;
  Mat3 sorted;
  for (int k = 0; k < 3; ++k) {
    out.eigenvalues[k] = lambda[order[k]];
    sorted.set_col(k, v.col(order[k]));
  }
  detail::canonicalize_column_signs(sorted);
  out.eigenvectors = OrthogonalFrame{sorted};

  const double denom = std::fmax(out.eigenvalues[0], 1e-300);
  out.gap_ratios[0] = (out.eigenvalues[0] - out.eigenvalues[1]) / denom;
  out.gap_ratios[1] = (out.eigenvalues[1] - out.eigenvalues[2]) / denom;
  return out;
}

// SVD of a general 3x3 matrix through the eigendecomposition of A^T A. The
// left frame is rebuilt by Gram-Schmidt over A v_k plus a cross product, and
// the two smaller singular values are re-measured against that frame; the
// raw sqrt(eigenvalue) route would carry sqrt(eps)-level noise near rank
// deficiency and leak it into the left vectors.
inline Svd3 svd3(const Mat3& a) {
  if (!is_finite(a)) throw NonFinite("svd3: non-finite entry");

  Mat3 b;  // A^T A, exactly symmetric by construction
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a(k, i) * a(k, j);
      b(i, j) = b(j, i) = s;
    }

  const EigenDecomposition3 eig = sym_eig3(b);

  Svd3 out;
  out.v = eig.eigenvectors;

  const Vec3 av0 = a * out.v.m.col(0);
  const double s0 = norm(av0);
  if (s0 == 0.0) {
    out.sigma = {0.0, 0.0, 0.0};
    return out;  // zero matrix: u and v default to the identity
  }
  const Vec3 u0 = av0 / s0;

  const Vec3 av1 = a * out.v.m.col(1);
  Vec3 w1 = av1 - dot(av1, u0) * u0;
  double s1 = norm(w1);
  Vec3 u1;
  if (s1 > s0 * 1e-14) {
    u1 = w1 / s1;
  } else {
    // rank <= 1: any unit vector orthogonal to u0 completes the frame
    int least = 0;
    for (int i = 1; i < 3; ++i)
      if (std::fabs(component(u0, i)) < std::fabs(component(u0, least))) least = i;
    Vec3 e{0, 0, 0};
    set_component(e, least, 1.0);
    u1 = e - dot(e, u0) * u0;
    u1 = u1 / norm(u1);
  }

  Vec3 u2 = cross(u0, u1);
  double s2 = dot(u2, a * out.v.m.col(2));
  if (s2 < 0.0) {
    u2 = -u2;
    s2 = -s2;
  }

  // eps-level re-measurement slack only
  s1 = std::fmin(s1, s0);
  s2 = std::fmin(s2, s1);

  Mat3 u;
  u.set_col(0, u0);
  u.set_col(1, u1);
  u.set_col(2, u2);
  out.u = OrthogonalFrame{u};
  out.sigma = {s0, s1, s2};
  return out;
}

// Sum of x x^T over a set of column vectors; the result is exactly symmetric.
inline Mat3 outer_accumulate(std::span<const Vec3> columns) {
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
  for (const Vec3& c : columns) {
    xx += c.x * c.x;
    xy += c.x * c.y;
    xz += c.x * c.z;
    yy += c.y * c.y;
    yz += c.y * c.z;
    zz += c.z * c.z;
  }
  Mat3 r;
  r(0, 0) = xx; r(0, 1) = xy; r(0, 2) = xz;
  r(1, 0) = xy; r(1, 1) = yy; r(1, 2) = yz;
  r(2, 0) = xz; r(2, 1) = yz; r(2, 2) = zz;
  return r;
}

}  // namespace wfa
