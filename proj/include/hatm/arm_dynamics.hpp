#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>

#include "hatm/errors.hpp"
#include "hatm/math_utils.hpp"
#include "hatm/wrench.hpp"

namespace hatm {

inline constexpr int kArmJointCount = 5;

using JointVector = Eigen::Matrix<double, kArmJointCount, 1>;

/// One row of a modified (adjacent-axis) D-H table: twist and offset of
/// the previous link plus this joint's offset and angle.
struct DhRow {
  double alpha_prev = 0.0;  // rad
  double a_prev = 0.0;      // m
  double d = 0.0;           // m
  double theta = 0.0;       // rad
};

/// Mass properties of one link, expressed in that link's joint frame.
struct LinkParams {
  double mass = 0.0;                                     // kg
  Eigen::Matrix3d inertia_c = Eigen::Matrix3d::Zero();   // about centroid, kg m^2
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();    // m, in link frame
};

/// Joint-space state of the arm. Angles are wrapped to (-pi, pi] on
/// construction so downstream trig stays well conditioned.
struct ArmState {
  JointVector angles = JointVector::Zero();
  JointVector rates = JointVector::Zero();
  JointVector accels = JointVector::Zero();

  ArmState() = default;
  ArmState(const JointVector& q, const JointVector& qd, const JointVector& qdd)
      : rates(qd), accels(qdd) {
    for (int i = 0; i < kArmJointCount; ++i) angles[i] = wrap_angle(q[i]);
  }
};

/// Adjacent-frame homogeneous transform for one modified D-H row.
inline Matrix4d dh_transform(const DhRow& row) {
  const double ca = std::cos(row.alpha_prev), sa = std::sin(row.alpha_prev);
  const double ct = std::cos(row.theta), st = std::sin(row.theta);
  Matrix4d t;
  t << ct, -st, 0.0, row.a_prev,
       st * ca, ct * ca, -sa, -row.d * sa,
       st * sa, ct * sa, ca, row.d * ca,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

inline void require_row_count(std::span<const DhRow> dh) {
  if (dh.size() != kArmJointCount) {
    throw Error(ErrorCode::kBadInput,
                "expected " + std::to_string(kArmJointCount) + " D-H rows, got " + std::to_string(dh.size()));
  }
}

/// Base-to-tip transform: the product of the five adjacent transforms
/// with the joint angles substituted into the theta column.
inline Matrix4d forward_kinematics(const ArmState& arm, std::span<const DhRow> dh) {
  require_row_count(dh);
  Matrix4d t = Matrix4d::Identity();
  for (int i = 0; i < kArmJointCount; ++i) {
    DhRow row = dh[i];
    row.theta = arm.angles[i];
    t = t * dh_transform(row);
  }
  return t;
}

/// Reaction wrench of the moving arm on the vehicle, in the arm base
/// frame S0.
///
/// Two-pass recursion over the link chain: the outward pass propagates
/// angular rate, angular acceleration and centroid acceleration from the
/// base boundary conditions; the inward pass accumulates inertial
/// wrenches from the tip back to the base. Gravity is folded in through
/// `base_accel_minus_gravity` (the base linear acceleration minus the
/// gravity vector, expressed in S0), which makes the returned wrench the
/// force/torque the arm applies to its mount.
///
/// `tip_wrench` is an external load applied at the S5 origin, expressed
/// in S5 (zero when the gripper is unloaded).
inline Wrench newton_euler_base_wrench(const ArmState& arm, std::span<const LinkParams> links,
                                       std::span<const DhRow> dh,
                                       const Eigen::Vector3d& base_accel_minus_gravity,
                                       const Eigen::Vector3d& base_omega,
                                       const Eigen::Vector3d& base_omega_dot,
                                       const Wrench& tip_wrench) {
  require_row_count(dh);
  if (links.size() != kArmJointCount) {
    throw Error(ErrorCode::kBadInput, "expected " + std::to_string(kArmJointCount) + " link parameter sets");
  }
  tip_wrench.require_frame(Frame::kS5);

  const Vector3d z_axis = Vector3d::UnitZ();

  // Rotations R[i] map frame S_{i+1} coordinates into S_i; p[i] is the
  // S_{i+1} origin in S_i.
  std::array<Matrix3d, kArmJointCount> rot;
  std::array<Vector3d, kArmJointCount> offset;
  for (int i = 0; i < kArmJointCount; ++i) {
    DhRow row = dh[i];
    row.theta = arm.angles[i];
    const Matrix4d t = dh_transform(row);
    rot[i] = t.block<3, 3>(0, 0);
    offset[i] = t.block<3, 1>(0, 3);
  }

  // Outward pass: link j quantities expressed in S_j (j = 1..5 stored at
  // index j-1).
  std::array<Vector3d, kArmJointCount> omega, omega_dot, accel_origin, force_c, torque_c;
  Vector3d w = base_omega, wd = base_omega_dot, a = base_accel_minus_gravity;
  for (int j = 0; j < kArmJointCount; ++j) {
    const Matrix3d r_to_child = rot[j].transpose();
    const Vector3d w_parent_in_child = r_to_child * w;
    const Vector3d w_child = w_parent_in_child + arm.rates[j] * z_axis;
    const Vector3d wd_child = r_to_child * wd + w_parent_in_child.cross(arm.rates[j] * z_axis) +
                              arm.accels[j] * z_axis;
    const Vector3d a_child = r_to_child * (a + wd.cross(offset[j]) + w.cross(w.cross(offset[j])));
    const Vector3d c = links[j].centroid;
    const Vector3d a_centroid = a_child + wd_child.cross(c) + w_child.cross(w_child.cross(c));
    omega[j] = w_child;
    omega_dot[j] = wd_child;
    accel_origin[j] = a_child;
    force_c[j] = links[j].mass * a_centroid;
    torque_c[j] = links[j].inertia_c * wd_child + w_child.cross(links[j].inertia_c * w_child);
    w = w_child;
    wd = wd_child;
    a = a_child;
  }

  // Inward pass from the tip. The running (f, n) pair is the wrench each
  // link passes to its parent, expressed in the link frame with the
  // incoming-force lever already folded in. The recursion naturally
  // produces the force the mount must apply to the arm; the tip load
  // (environment acting on the gripper) and the final result are negated
  // so the returned wrench is the reaction the arm applies to the
  // vehicle.
  Vector3d f = -tip_wrench.force;
  Vector3d n = -tip_wrench.torque;
  for (int j = kArmJointCount - 1; j >= 0; --j) {
    const Vector3d c = links[j].centroid;
    const Vector3d f_link = f + force_c[j];
    const Vector3d n_link = torque_c[j] + n + c.cross(force_c[j]);
    // Transport into the parent frame S_j -> S_{j-1} (S0 when j = 0).
    f = rot[j] * f_link;
    n = rot[j] * n_link + offset[j].cross(f);
  }
  return Wrench{-f, -n, Frame::kS0};
}

/// Composite mass properties of the arm about the S0 origin, in S0
/// coordinates: {total mass, centroid, inertia}. Used to fold the arm
/// configuration into the vehicle inertia once per control tick.
struct CompositeInertia {
  double mass = 0.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();
};

inline CompositeInertia arm_composite_inertia(const ArmState& arm, std::span<const LinkParams> links,
                                              std::span<const DhRow> dh) {
  require_row_count(dh);
  CompositeInertia out;
  Matrix4d t = Matrix4d::Identity();
  Vector3d first_moment = Vector3d::Zero();
  for (int j = 0; j < kArmJointCount; ++j) {
    DhRow row = dh[j];
    row.theta = arm.angles[j];
    t = t * dh_transform(row);
    const Matrix3d r = t.block<3, 3>(0, 0);
    const Vector3d c = t.block<3, 1>(0, 3) + r * links[j].centroid;
    const double m = links[j].mass;
    out.mass += m;
    first_moment += m * c;
    out.inertia += r * links[j].inertia_c * r.transpose() +
                   m * (c.squaredNorm() * Matrix3d::Identity() - c * c.transpose());
  }
  if (out.mass > 0.0) out.centroid = first_moment / out.mass;
  return out;
}

/// The arm as built: joint table, link mass properties and the mounting
/// rotation from S0 to the vehicle body frame.
struct ArmModel {
  std::array<DhRow, kArmJointCount> dh{};
  std::array<LinkParams, kArmJointCount> links{};
  Eigen::Matrix3d mount_rotation = Eigen::Matrix3d::Identity();  // S0 -> body
  bool joint5_actuated = false;

  /// Default build: measured joint table, 180 g total arm mass spread
  /// over the links proportional to their lengths, slender-rod inertias.
  static ArmModel standard() {
    ArmModel m;
    m.dh = {DhRow{0.0, 0.0, 0.0, 0.0},
            DhRow{0.0, 0.134, 0.0, 0.0},
            DhRow{-kPi / 2, 0.028, 0.013, 0.0},
            DhRow{kPi / 2, 0.038, 0.0, 0.0},
            DhRow{-kPi / 2, 0.034, 0.015, 0.0}};
    // Effective link lengths: distance to the next joint origin, plus a
    // nominal 40 mm for the gripper body past the last frame.
    std::array<double, kArmJointCount> len{};
    for (int j = 0; j < kArmJointCount - 1; ++j) {
      const DhRow& next = m.dh[j + 1];
      len[j] = Vector3d(next.a_prev, -next.d * std::sin(next.alpha_prev),
                        next.d * std::cos(next.alpha_prev))
                   .norm();
    }
    len[kArmJointCount - 1] = 0.040;
    double total_len = 0.0;
    for (double l : len) total_len += l;
    const double arm_mass = 0.180;
    for (int j = 0; j < kArmJointCount; ++j) {
      LinkParams& lp = m.links[j];
      lp.mass = arm_mass * len[j] / total_len;
      Vector3d to_next = Vector3d(len[j], 0.0, 0.0);
      if (j + 1 < kArmJointCount) {
        const DhRow& next = m.dh[j + 1];
        to_next = Vector3d(next.a_prev, -next.d * std::sin(next.alpha_prev),
                           next.d * std::cos(next.alpha_prev));
      }
      lp.centroid = 0.5 * to_next;
      // Slender rod: negligible inertia about its own axis.
      const double i_perp = lp.mass * len[j] * len[j] / 12.0;
      const Vector3d axis = len[j] > 0.0 ? to_next.normalized() : Vector3d::UnitX();
      lp.inertia_c = i_perp * (Matrix3d::Identity() - axis * axis.transpose());
    }
    return m;
  }
};

}  // namespace hatm
