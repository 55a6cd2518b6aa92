#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace hatm {

using Eigen::Matrix3d;
using Eigen::Matrix4d;
using Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

inline Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

inline Matrix3d skew(const Vector3d& v) {
  Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Body-to-world rotation from Z-Y-X Euler angles (roll, pitch, yaw).
inline Matrix3d euler_zyx_to_matrix(double roll, double pitch, double yaw) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

/// Inverse of euler_zyx_to_matrix. Pitch is taken in [-pi/2, pi/2].
inline Vector3d matrix_to_euler_zyx(const Matrix3d& r) {
  const double pitch = -std::asin(std::clamp(r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

/// Map from body angular rate to Z-Y-X Euler angle rates.
/// Singular at |pitch| = pi/2.
inline Matrix3d euler_rate_matrix(double roll, double pitch) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), tp = std::tan(pitch);
  Matrix3d w;
  w << 1, sr * tp, cr * tp, 0, cr, -sr, 0, sr / cp, cr / cp;
  return w;
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace hatm
