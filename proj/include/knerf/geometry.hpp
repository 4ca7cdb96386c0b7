#pragma once

#include <array>
#include <cmath>

#include "knerf/common.hpp"

namespace knerf {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    KNERF_REQUIRE(n > 0, "cannot normalize zero vector");
    return *this / n;
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

struct Mat3 {
  // Row-major.
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }

  double& at(int r, int c) { return m[static_cast<size_t>(r) * 3 + c]; }
  double at(int r, int c) const { return m[static_cast<size_t>(r) * 3 + c]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  // Max abs deviation of R^T R from the identity.
  double orthonormality_error() const {
    Mat3 g = transposed() * (*this);
    double worst = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        worst = std::max(worst, std::abs(g.at(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
  }
};

// Rodrigues rotation from an axis-angle vector (angle = |v| radians).
inline Mat3 axis_angle_to_matrix(const Vec3& v) {
  double angle = v.norm();
  if (angle < 1e-12) return Mat3::identity();
  Vec3 a = v / angle;
  double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  Mat3 r;
  r.m = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
         t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
         t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
  return r;
}

struct Mat4 {
  // Row-major homogeneous transform.
  std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

  static Mat4 identity() { return {}; }

  double& at(int r, int c) { return m[static_cast<size_t>(r) * 4 + c]; }
  double at(int r, int c) const { return m[static_cast<size_t>(r) * 4 + c]; }

  static Mat4 from_rt(const Mat3& rot, const Vec3& t) {
    Mat4 out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.at(i, j) = rot.at(i, j);
    out.at(0, 3) = t.x;
    out.at(1, 3) = t.y;
    out.at(2, 3) = t.z;
    return out;
  }

  Mat3 rotation() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.at(i, j) = at(i, j);
    return r;
  }

  Vec3 translation() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

  Mat4 operator*(const Mat4& o) const {
    Mat4 r;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = 0;
        for (int k = 0; k < 4; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }

  Vec3 transform_point(const Vec3& p) const {
    return {at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z + at(0, 3),
            at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z + at(1, 3),
            at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z + at(2, 3)};
  }
};

// Camera-to-world matrix for a camera at `eye` looking at `target`,
// OpenGL/Blender convention: -z forward, +y up in camera space.
inline Mat4 look_at_c2w(const Vec3& eye, const Vec3& target, const Vec3& up_hint = {0, 0, 1}) {
  Vec3 backward = (eye - target).normalized();  // camera +z
  Vec3 up = up_hint;
  if (std::abs(up.normalized().dot(backward)) > 1.0 - 1e-9) up = {0, 1, 0};
  Vec3 right = up.cross(backward).normalized();
  Vec3 cam_up = backward.cross(right);
  Mat3 rot;
  rot.m = {right.x, cam_up.x, backward.x,
           right.y, cam_up.y, backward.y,
           right.z, cam_up.z, backward.z};
  return Mat4::from_rt(rot, eye);
}

}  // namespace knerf
