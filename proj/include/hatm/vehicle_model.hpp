#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "hatm/errors.hpp"
#include "hatm/math_utils.hpp"
#include "hatm/wrench.hpp"

namespace hatm {

inline constexpr double kEulerSingularityTol = 1e-3;  // rad from |pitch| = pi/2

/// Vehicle rigid-body state. Attitude is Z-Y-X Euler (roll, pitch, yaw),
/// position/velocity in the world frame, angular rate in the body frame.
struct RigidBodyState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d attitude = Eigen::Vector3d::Zero();  // roll, pitch, yaw
  Eigen::Vector3d body_rate = Eigen::Vector3d::Zero();

  Eigen::Matrix3d rotation_body_to_world() const {
    return euler_zyx_to_matrix(attitude.x(), attitude.y(), attitude.z());
  }
};

struct VehicleParams {
  double mass = 2.4;                                   // kg, chassis (arm handled separately)
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();   // kg m^2, body frame
  double half_track = 0.17;                            // m, wheel centre to vehicle centre
  double wheel_radius = 0.17;                          // m
  double wheel_inertia = 2e-3;                         // kg m^2 about the axle
  Eigen::Vector3d com_offset = Eigen::Vector3d::Zero();  // m, body frame
  double gravity = 9.81;                               // m/s^2
  double max_thrust = 47.0;                            // N
  double max_torque = 2.0;                             // N m per axis

  static VehicleParams standard() {
    VehicleParams p;
    p.inertia = Eigen::Vector3d(0.046, 0.069, 0.069).asDiagonal();
    return p;
  }

  Eigen::Vector3d gravity_vector() const { return {0.0, 0.0, gravity}; }
};

/// The contacted surface: a plane through the origin, inclined by gamma
/// about the world y-axis (0 = floor, pi/2 = vertical wall), uphill
/// along world +x.
struct SurfaceModel {
  double gamma = 0.0;     // rad
  double mu_r = 0.02;     // rolling friction coefficient
  double mu_smax = 0.7;   // max static (lateral) friction coefficient
  bool in_contact = false;

  /// Unit normal pointing from the surface toward the vehicle side.
  Eigen::Vector3d normal() const { return {-std::sin(gamma), 0.0, std::cos(gamma)}; }
};

struct RotorCommand {
  double thrust = 0.0;    // U1, N, >= 0
  double torque_x = 0.0;  // U2, N m, body roll axis
  double torque_y = 0.0;  // U3, N m, body pitch axis
  double torque_z = 0.0;  // U4, N m, body yaw axis

  Eigen::Vector3d torque() const { return {torque_x, torque_y, torque_z}; }

  RotorCommand clamped(const VehicleParams& p) const {
    RotorCommand c = *this;
    c.thrust = std::clamp(c.thrust, 0.0, p.max_thrust);
    c.torque_x = std::clamp(c.torque_x, -p.max_torque, p.max_torque);
    c.torque_y = std::clamp(c.torque_y, -p.max_torque, p.max_torque);
    c.torque_z = std::clamp(c.torque_z, -p.max_torque, p.max_torque);
    return c;
  }
};

/// Reduced state while rolling: heading and tilt about the surface
/// normal / wheel axis plus forward speed, with the solved contact
/// forces alongside.
struct TerrestrialState {
  double alpha = 0.0;       // rad, heading about the surface normal
  double alpha_rate = 0.0;  // rad/s
  double beta = 0.0;        // rad, body tilt about the wheel axis (z_b from surface normal)
  double beta_rate = 0.0;   // rad/s
  double v_rx = 0.0;        // m/s, speed along the heading axis
  double f_n = 0.0;         // N, total normal force
  double f_left = 0.0;      // N
  double f_right = 0.0;     // N
};

/// Roll / yaw-increment / along-heading slope angles implied by full
/// wheel contact on a surface of inclination gamma at heading alpha.
struct ContactAngles {
  double phi = 0.0;        // rad, body roll
  double delta_psi = 0.0;  // rad, yaw increment over the uphill azimuth
  double delta = 0.0;      // rad, slope along the current heading
};

inline ContactAngles contact_attitude(double gamma, double alpha) {
  const double sg = std::sin(gamma), cg = std::cos(gamma);
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  ContactAngles out;
  out.phi = std::atan2(-sg * sa, std::sqrt(ca * ca + sa * sa * cg * cg));
  out.delta_psi = std::atan2(cg * sa, ca);
  out.delta = std::atan2(sg * ca, std::sqrt(sa * sa + ca * ca * cg * cg));
  return out;
}

struct RollingRotations {
  Eigen::Matrix3d world_to_rolling;
  Eigen::Matrix3d body_to_rolling;
};

/// World->rolling and body->rolling rotations. `psi` is the vehicle yaw;
/// when it equals the contact-consistent value the yaw correction term
/// vanishes. `theta` is the pitch-like tilt measured from the
/// along-heading slope angle `delta`.
inline RollingRotations rolling_rotations(double gamma, double alpha, double psi, double delta,
                                          double theta) {
  const double dpsi = contact_attitude(gamma, alpha).delta_psi;
  RollingRotations out;
  out.world_to_rolling = rot_z(-alpha) * rot_y(gamma) * rot_z(dpsi - psi);
  out.body_to_rolling = rot_y(delta + theta);
  return out;
}

/// Rotor force and torque expressed in the rolling frame. `tilt` is the
/// angle of the thrust axis from the surface normal (delta + theta).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> rotor_wrench_rolling(const RotorCommand& cmd,
                                                                        double tilt) {
  const double st = std::sin(tilt), ct = std::cos(tilt);
  const Eigen::Vector3d f{cmd.thrust * st, 0.0, cmd.thrust * ct};
  const Eigen::Vector3d m{cmd.torque_x * ct + cmd.torque_z * st, cmd.torque_y,
                          -cmd.torque_x * st + cmd.torque_z * ct};
  return {f, m};
}

/// Torque about the vehicle centre induced by a centre-of-mass offset,
/// in the rolling frame.
inline Eigen::Vector3d com_gravity_torque(const VehicleParams& params,
                                          const Eigen::Matrix3d& body_to_rolling,
                                          const Eigen::Vector3d& f_g_rolling) {
  return (body_to_rolling * params.com_offset).cross(f_g_rolling);
}

struct AerialDerivatives {
  Eigen::Vector3d position_dot = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity_dot = Eigen::Vector3d::Zero();
  Eigen::Vector3d attitude_dot = Eigen::Vector3d::Zero();
  Eigen::Vector3d body_rate_dot = Eigen::Vector3d::Zero();
};

/// Free-flight rigid-body dynamics with the arm reaction wrench folded
/// in as a body-frame disturbance.
inline AerialDerivatives aerial_derivatives(const RigidBodyState& state, const RotorCommand& cmd,
                                            const Wrench& arm_wrench, const VehicleParams& params) {
  arm_wrench.require_frame(Frame::kBody);
  if (std::abs(state.attitude.y()) >= kPi / 2 - kEulerSingularityTol) {
    throw Error(ErrorCode::kEulerSingularity, "pitch too close to +-90 deg for Euler rates");
  }
  const Eigen::Matrix3d r = state.rotation_body_to_world();
  const Eigen::Vector3d thrust_body{0.0, 0.0, cmd.thrust};

  AerialDerivatives d;
  d.position_dot = state.velocity;
  d.velocity_dot = r * (thrust_body + arm_wrench.force) / params.mass - params.gravity_vector();
  const Eigen::Vector3d& w = state.body_rate;
  d.body_rate_dot = params.inertia.ldlt().solve(cmd.torque() + arm_wrench.torque -
                                                w.cross(params.inertia * w));
  d.attitude_dot = euler_rate_matrix(state.attitude.x(), state.attitude.y()) * w;
  return d;
}

struct FrictionForces {
  Eigen::Vector3d f_roll = Eigen::Vector3d::Zero();   // N, rolling resistance
  Eigen::Vector3d f_wheel = Eigen::Vector3d::Zero();  // N, wheel spin-up resistance
  Eigen::Vector3d tau_roll = Eigen::Vector3d::Zero(); // N m, differential rolling resistance
  Eigen::Vector3d tau_wheel = Eigen::Vector3d::Zero();// N m, wheel spin-up yaw resistance
};

inline double opposing_sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Rolling-contact friction terms, all expressed in the rolling frame.
/// Rolling resistance opposes the current motion and vanishes at rest;
/// the wheel terms are the inertial resistance of spinning the wheels up.
inline FrictionForces friction_forces(const TerrestrialState& terr, const VehicleParams& params,
                                      const SurfaceModel& surf, double v_rx_dot, double alpha_ddot) {
  if (!surf.in_contact) {
    throw Error(ErrorCode::kBadInput, "friction_forces called without surface contact");
  }
  FrictionForces out;
  const double wheel_term = 2.0 * params.wheel_inertia / (params.wheel_radius * params.wheel_radius);
  out.f_roll.x() = opposing_sign(terr.v_rx) * surf.mu_r * (terr.f_left + terr.f_right);
  out.f_wheel.x() = wheel_term * v_rx_dot;
  out.tau_roll.z() = opposing_sign(terr.alpha_rate) * params.half_track * surf.mu_r *
                     std::abs(terr.f_left - terr.f_right);
  out.tau_wheel.z() = wheel_term * params.half_track * params.half_track * alpha_ddot;
  return out;
}

struct TerrestrialDerivatives {
  Eigen::Vector3d position_dot = Eigen::Vector3d::Zero();  // world frame
  double v_rx_dot = 0.0;
  double alpha_dot = 0.0;
  double alpha_ddot = 0.0;
  double beta_dot = 0.0;
  double beta_ddot = 0.0;
  double f_n = 0.0;
  double f_left = 0.0;
  double f_right = 0.0;
  bool slip = false;
  bool wheel_lift = false;
};

/// Complete rolling dynamics on the inclined surface. `arm_wrench_r` is
/// the reaction the arm applies to the vehicle, in the rolling frame.
///
/// Solved in order: the normal-axis force balance gives the total normal
/// force; the heading-axis torque balance splits it across the wheels;
/// the forward force balance gives the speed derivative (wheel spin-up
/// resistance folded in algebraically through an effective mass, since
/// it is itself proportional to the solved acceleration); the two torque
/// balances give the tilt and heading angular accelerations (same
/// algebraic treatment for the wheel yaw resistance); finally the
/// lateral static-friction inequality sets the slip flag.
inline TerrestrialDerivatives terrestrial_derivatives(const RigidBodyState& state,
                                                      const TerrestrialState& terr,
                                                      const RotorCommand& cmd,
                                                      const Wrench& arm_wrench_r,
                                                      const SurfaceModel& surf,
                                                      const VehicleParams& params) {
  arm_wrench_r.require_frame(Frame::kRolling);
  if (!surf.in_contact) {
    throw Error(ErrorCode::kBadInput, "terrestrial_derivatives called without surface contact");
  }
  (void)state;

  const Eigen::Matrix3d r_wr = rot_z(-terr.alpha) * rot_y(surf.gamma);
  const Eigen::Matrix3d r_br = rot_y(terr.beta);
  const Eigen::Vector3d f_g = params.mass * (r_wr * params.gravity_vector());
  const auto [f_rot, m_rot] = rotor_wrench_rolling(cmd, terr.beta);
  const Eigen::Vector3d& f_arm = arm_wrench_r.force;
  const Eigen::Vector3d& n_arm = arm_wrench_r.torque;
  const Eigen::Vector3d tau_g = com_gravity_torque(params, r_br, f_g);

  TerrestrialDerivatives d;

  // Normal-axis force balance.
  d.f_n = f_g.z() - f_arm.z() - f_rot.z();
  if (d.f_n < 0.0) {
    throw Error(ErrorCode::kContactLost, "normal force went negative (" + std::to_string(d.f_n) + " N)");
  }

  // Wheel load split from the heading-axis torque balance. One-sided
  // contact: a negative wheel load is clamped to zero and flagged.
  const double diff = (m_rot.x() - tau_g.x() + n_arm.x()) / params.half_track;
  d.f_left = 0.5 * (d.f_n + diff);
  d.f_right = 0.5 * (d.f_n - diff);
  if (d.f_left < 0.0 || d.f_right < 0.0) {
    d.wheel_lift = true;
    d.f_left = std::max(d.f_left, 0.0);
    d.f_right = std::max(d.f_right, 0.0);
    const double s = d.f_left + d.f_right;
    if (s > 0.0) {
      d.f_left *= d.f_n / s;
      d.f_right *= d.f_n / s;
    }
  }

  const double wheel_term = 2.0 * params.wheel_inertia / (params.wheel_radius * params.wheel_radius);

  // Forward force balance with the wheel spin-up term folded into an
  // effective mass.
  const double f_roll_x = opposing_sign(terr.v_rx) * surf.mu_r * d.f_n;
  const double net_x = f_rot.x() - f_g.x() + f_arm.x() - f_roll_x;
  d.v_rx_dot = net_x / (params.mass + wheel_term);

  // Angular balances about the wheel axis and the surface normal.
  const Eigen::Matrix3d inertia_r = r_br * params.inertia * r_br.transpose();
  const double i_yy = inertia_r(1, 1);
  const double i_zz = inertia_r(2, 2);
  d.beta_dot = terr.beta_rate;
  d.beta_ddot = (m_rot.y() - tau_g.y() + n_arm.y()) / i_yy;
  const double tau_roll_z = opposing_sign(terr.alpha_rate) * params.half_track * surf.mu_r *
                            std::abs(d.f_left - d.f_right);
  const double net_z = m_rot.z() - tau_roll_z - tau_g.z() + n_arm.z();
  d.alpha_dot = terr.alpha_rate;
  d.alpha_ddot = net_z / (i_zz + wheel_term * params.half_track * params.half_track);

  // Lateral static-friction inequality.
  const double lateral = f_g.y() - f_arm.y();
  d.slip = std::abs(lateral) > surf.mu_smax * d.f_n;

  // World-frame position rate: forward speed along the heading axis.
  d.position_dot = terr.v_rx * r_wr.transpose().col(0);
  return d;
}

/// Normal force the current command would produce, without touching the
/// contact-lost error path. Used by the mode-switch logic to probe
/// whether rolling contact is sustainable.
inline double probe_normal_force(const TerrestrialState& terr, const RotorCommand& cmd,
                                 const Wrench& arm_wrench_r, const SurfaceModel& surf,
                                 const VehicleParams& params) {
  const Eigen::Matrix3d r_wr = rot_z(-terr.alpha) * rot_y(surf.gamma);
  const Eigen::Vector3d f_g = params.mass * (r_wr * params.gravity_vector());
  const auto [f_rot, m_rot] = rotor_wrench_rolling(cmd, terr.beta);
  return f_g.z() - arm_wrench_r.force.z() - f_rot.z();
}

}  // namespace hatm
