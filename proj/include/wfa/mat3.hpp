#pragma once

#include <cmath>

#include "wfa/vec3.hpp"

namespace wfa {

// Dense 3x3 matrix, row-major.
struct Mat3 {
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  double& operator()(int r, int c) { return m[r][c]; }
  double operator()(int r, int c) const { return m[r][c]; }

  static Mat3 zero() { return Mat3{}; }

  static Mat3 identity() {
    Mat3 a;
    a.m[0][0] = a.m[1][1] = a.m[2][2] = 1.0;
    return a;
  }

  static Mat3 diagonal(double a, double b, double c) {
    Mat3 d;
    d.m[0][0] = a;
    d.m[1][1] = b;
    d.m[2][2] = c;
    return d;
  }

  static Mat3 from_columns(Vec3 c0, Vec3 c1, Vec3 c2) {
    Mat3 a;
    a.m[0][0] = c0.x; a.m[0][1] = c1.x; a.m[0][2] = c2.x;
    a.m[1][0] = c0.y; a.m[1][1] = c1.y; a.m[1][2] = c2.y;
    a.m[2][0] = c0.z; a.m[2][1] = c1.z; a.m[2][2] = c2.z;
    return a;
  }

  static Mat3 from_rows(Vec3 r0, Vec3 r1, Vec3 r2) {
    Mat3 a;
    a.m[0][0] = r0.x; a.m[0][1] = r0.y; a.m[0][2] = r0.z;
    a.m[1][0] = r1.x; a.m[1][1] = r1.y; a.m[1][2] = r1.z;
    a.m[2][0] = r2.x; a.m[2][1] = r2.y; a.m[2][2] = r2.z;
    return a;
  }

  Vec3 col(int c) const { return {m[0][c], m[1][c], m[2][c]}; }
  Vec3 row(int r) const { return {m[r][0], m[r][1], m[r][2]}; }

  void set_col(int c, Vec3 v) {
    m[0][c] = v.x;
    m[1][c] = v.y;
    m[2][c] = v.z;
  }
};

inline Mat3 operator+(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[i][j] + b.m[i][j];
  return r;
}

inline Mat3 operator-(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[i][j] - b.m[i][j];
  return r;
}

inline Mat3 operator*(double s, const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = s * a.m[i][j];
  return r;
}

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a.m[i][k] * b.m[k][j];
      r.m[i][j] = s;
    }
  return r;
}

inline Vec3 operator*(const Mat3& a, Vec3 v) {
  return {a.m[0][0] * v.x + a.m[0][1] * v.y + a.m[0][2] * v.z,
          a.m[1][0] * v.x + a.m[1][1] * v.y + a.m[1][2] * v.z,
          a.m[2][0] * v.x + a.m[2][1] * v.y + a.m[2][2] * v.z};
}

inline Mat3& operator+=(Mat3& a, const Mat3& b) { a = a + b; return a; }

inline Mat3 transpose(const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[j][i];
  return r;
}

inline double det3(const Mat3& a) {
  return a.m[0][0] * (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) -
         a.m[0][1] * (a.m[1][0] * a.m[2][2] - a.m[1][2] * a.m[2][0]) +
         a.m[0][2] * (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]);
}

inline Mat3 matmul3(const Mat3& a, const Mat3& b) { return a * b; }

// a b^T
inline Mat3 outer(Vec3 a, Vec3 b) {
  Mat3 r;
  r.m[0][0] = a.x * b.x; r.m[0][1] = a.x * b.y; r.m[0][2] = a.x * b.z;
  r.m[1][0] = a.y * b.x; r.m[1][1] = a.y * b.y; r.m[1][2] = a.y * b.z;
  r.m[2][0] = a.z * b.x; r.m[2][1] = a.z * b.y; r.m[2][2] = a.z * b.z;
  return r;
}

inline double max_abs(const Mat3& a) {
  double v = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v = std::fmax(v, std::fabs(a.m[i][j]));
  return v;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) { return max_abs(a - b); }

inline bool is_finite(const Mat3& a) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!std::isfinite(a.m[i][j])) return false;
  return true;
}

// max-abs entry of m m^T - I
inline double orthogonality_error(const Mat3& a) {
  return max_abs_diff(a * transpose(a), Mat3::identity());
}

}  // namespace wfa
