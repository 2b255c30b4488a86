#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "pcf/errors.hpp"

namespace pcf {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  constexpr double squared_norm() const { return dot(*this); }
  Vec3 normalized() const {
    const double n = norm();
    if (n <= 0.0) throw Error::argument("cannot normalize zero vector");
    return *this / n;
  }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
  return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static constexpr Mat3 identity() { return {}; }

  static Mat3 from_cols(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 r;
    r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return r;
  }

  static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    Mat3 r;
    r.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
    return r;
  }

  double operator()(int r, int c) const { return m[static_cast<size_t>(r) * 3 + c]; }
  double& operator()(int r, int c) { return m[static_cast<size_t>(r) * 3 + c]; }

  Vec3 col(int c) const { return {m[0u + c], m[3u + c], m[6u + c]}; }
  Vec3 row(int r) const { return {m[r * 3u], m[r * 3u + 1], m[r * 3u + 2]}; }

  Vec3 operator*(const Vec3& v) const {
    return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r(i, j) = (*this)(i, 0) * o(0, j) + (*this)(i, 1) * o(1, j) + (*this)(i, 2) * o(2, j);
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  // max-abs entry of R^T R - I
  double orthonormality_error() const {
    const Mat3 g = transposed() * (*this);
    double e = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        e = std::max(e, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return e;
  }

  bool is_rotation(double tol = 1e-9) const {
    return orthonormality_error() < tol && std::abs(det() - 1.0) < tol;
  }
};

// Rigid transform x -> R x + t.
struct Rigid {
  Mat3 R;
  Vec3 t;

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Vec3 rotate(const Vec3& v) const { return R * v; }
  Rigid inverse() const {
    const Mat3 rt = R.transposed();
    return {rt, -(rt * t)};
  }
  Rigid then(const Rigid& outer) const {  // outer ∘ this
    return {outer.R * R, outer.R * t + outer.t};
  }
};

// Rotation by angle about a unit axis (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  const Vec3 u = axis.normalized();
  const double c = std::cos(angle), s = std::sin(angle), ic = 1.0 - c;
  Mat3 r;
  r.m = {c + u.x * u.x * ic,       u.x * u.y * ic - u.z * s, u.x * u.z * ic + u.y * s,
         u.y * u.x * ic + u.z * s, c + u.y * u.y * ic,       u.y * u.z * ic - u.x * s,
         u.z * u.x * ic - u.y * s, u.z * u.y * ic + u.x * s, c + u.z * u.z * ic};
  return r;
}

// Geodesic angle between two rotations.
inline double rotation_angle(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transposed() * b;
  const double tr = d(0, 0) + d(1, 1) + d(2, 2);
  const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace pcf
