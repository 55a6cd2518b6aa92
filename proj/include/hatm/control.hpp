#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>

#include "hatm/errors.hpp"
#include "hatm/math_utils.hpp"
#include "hatm/vehicle_model.hpp"
#include "hatm/wrench.hpp"

namespace hatm {

/// Desired state sample from the reference trajectory, world frame.
struct ReferenceState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double timestamp = 0.0;
};

struct PidGains {
  Eigen::Vector3d kp = Eigen::Vector3d::Zero();
  Eigen::Vector3d ki = Eigen::Vector3d::Zero();
  Eigen::Vector3d kd = Eigen::Vector3d::Zero();
  double integral_limit = 1.0;
};

struct AttitudeSetpoint {
  double phi_d = 0.0;
  double theta_d = 0.0;
  double psi_d = 0.0;
  double thrust = 0.0;  // U1, N
};

/// Per-axis PID with a clamped integrator. The derivative term acts on a
/// caller-supplied error rate so each loop can use the measurement it
/// actually has.
class VectorPid {
 public:
  Eigen::Vector3d update(const Eigen::Vector3d& error, const Eigen::Vector3d& error_rate, double dt,
                         const PidGains& g) {
    integral_ += error * dt;
    for (int i = 0; i < 3; ++i) {
      integral_[i] = std::clamp(integral_[i], -g.integral_limit, g.integral_limit);
    }
    return g.kp.cwiseProduct(error) + g.ki.cwiseProduct(integral_) + g.kd.cwiseProduct(error_rate);
  }

  void reset() { integral_.setZero(); }
  const Eigen::Vector3d& integral() const { return integral_; }

 private:
  Eigen::Vector3d integral_ = Eigen::Vector3d::Zero();
};

/// Outer position / inner velocity cascade. Produces the commanded
/// acceleration; the caller scales by mass where a force is needed.
class PositionCascade {
 public:
  Eigen::Vector3d commanded_acceleration(const RigidBodyState& state, const ReferenceState& ref,
                                         const PidGains& pos_gains, const PidGains& vel_gains,
                                         double dt) {
    const Eigen::Vector3d pos_err = ref.position - state.position;
    const Eigen::Vector3d pos_err_rate = ref.velocity - state.velocity;
    const Eigen::Vector3d vel_setpoint =
        pos_pid_.update(pos_err, pos_err_rate, dt, pos_gains) + ref.velocity;
    const Eigen::Vector3d vel_err = vel_setpoint - state.velocity;
    return vel_pid_.update(vel_err, Eigen::Vector3d::Zero(), dt, vel_gains) + ref.acceleration;
  }

  void reset() {
    pos_pid_.reset();
    vel_pid_.reset();
  }

 private:
  VectorPid pos_pid_;
  VectorPid vel_pid_;
};

/// Desired net world-frame force for free flight: cascade output times
/// mass, gravity excluded.
inline Eigen::Vector3d aerial_position_control(PositionCascade& cascade, const RigidBodyState& state,
                                               const ReferenceState& ref, const PidGains& pos_gains,
                                               const PidGains& vel_gains, double dt, double mass) {
  return mass * cascade.commanded_acceleration(state, ref, pos_gains, vel_gains, dt);
}

/// Tilt and thrust realizing a desired net force, with the arm reaction
/// force compensated. Exact inversion of the thrust direction map: the
/// returned setpoint reconstructs `f_desired` through
/// R(phi_d, theta_d, psi) * [0,0,U1] = f_desired + m g z - f_arm.
inline AttitudeSetpoint attitude_determination(const Eigen::Vector3d& f_desired, double psi,
                                               const Eigen::Vector3d& arm_force_world,
                                               const VehicleParams& params) {
  const Eigen::Vector3d total = f_desired + Eigen::Vector3d(0.0, 0.0, params.mass * params.gravity) -
                                arm_force_world;
  const Eigen::Vector3d t = rot_z(-psi) * total;
  if (t.z() <= 0.0) {
    throw Error(ErrorCode::kInfeasibleAttitude, "compensated force does not point upward");
  }
  AttitudeSetpoint sp;
  sp.theta_d = std::atan2(t.x(), t.z());
  sp.phi_d = std::atan2(-t.y(), std::hypot(t.x(), t.z()));
  sp.psi_d = psi;
  sp.thrust = total.norm();
  return sp;
}

/// Same cascade as the aerial position loop, projected onto the heading
/// axis of the rolling frame; the constrained lateral and normal axes
/// are discarded.
inline double terrestrial_position_control(PositionCascade& cascade, const RigidBodyState& state,
                                           const ReferenceState& ref, const PidGains& pos_gains,
                                           const PidGains& vel_gains,
                                           const Eigen::Matrix3d& world_to_rolling, double dt) {
  const Eigen::Vector3d a_cmd = cascade.commanded_acceleration(state, ref, pos_gains, vel_gains, dt);
  return (world_to_rolling * a_cmd).x();
}

/// Inclination-scheduled gain of the line-of-sight yaw law. The schedule
/// is affine in the inclination expressed in degrees.
struct YawGainSchedule {
  double slope_per_deg = 0.137;
  double offset = 1.1051;

  double gain(double gamma_rad) const { return slope_per_deg * rad_to_deg(gamma_rad) + offset; }
};

/// Line-of-sight yaw-rate guidance: the commanded heading rate is the
/// scheduled gain times the rate of rotation of the sight line to the
/// target, estimated by backward differencing with a low-pass.
class LosYawGuidance {
 public:
  struct Config {
    YawGainSchedule schedule;
    double deadband = 0.01;        // m
    double lowpass_cutoff = 5.0;   // Hz
  };

  double update(const Eigen::Vector2d& position, const Eigen::Vector2d& target,
                const Eigen::Vector2d& velocity, double gamma, double dt, const Config& cfg) {
    (void)velocity;
    const Eigen::Vector2d rel = target - position;
    if (rel.norm() < cfg.deadband) {
      has_prev_ = false;  // sight line degenerates inside the deadband
      return 0.0;
    }
    const double q = std::atan2(rel.y(), rel.x());
    double dq = 0.0;
    if (has_prev_) {
      dq = wrap_angle(q - prev_q_) / dt;
      const double a = dt / (dt + 1.0 / (2.0 * kPi * cfg.lowpass_cutoff));
      filtered_dq_ += a * (dq - filtered_dq_);
    } else {
      filtered_dq_ = 0.0;
    }
    prev_q_ = q;
    has_prev_ = true;
    return cfg.schedule.gain(gamma) * filtered_dq_;
  }

  void reset() {
    has_prev_ = false;
    filtered_dq_ = 0.0;
  }

 private:
  double prev_q_ = 0.0;
  double filtered_dq_ = 0.0;
  bool has_prev_ = false;
};

/// Thrust-magnitude schedule over surface inclination (in radians):
/// ||F|| = (c2 g^2 + c1 g + c0) * m * g.
struct ThrustSchedule {
  double c2 = -0.002;
  double c1 = 0.0179;
  double c0 = 0.6728;

  double thrust(double gamma_rad, const VehicleParams& params) const {
    const double scale = c2 * gamma_rad * gamma_rad + c1 * gamma_rad + c0;
    return scale * params.mass * params.gravity;
  }
};

struct ThrustPitchResult {
  double theta_d = 0.0;       // rad, tilt past the along-heading slope angle
  double thrust = 0.0;        // U1, N
  double residual_forward = 0.0;
  double residual_normal = 0.0;
};

inline constexpr double kBalanceResidualTol = 1e-8;

/// Pitch and thrust realizing the desired forward acceleration while the
/// forward and normal force balances hold for the given normal force.
/// Rolling friction enters with the forward-motion sign convention. The
/// solution is verified by back-substitution into both balances.
inline ThrustPitchResult thrust_pitch_determination(double a_rx_d, double gamma, double alpha,
                                                    double f_n, const Wrench& arm_wrench_r,
                                                    const Eigen::Vector3d& f_wheel,
                                                    const VehicleParams& params,
                                                    const SurfaceModel& surf,
                                                    const ThrustSchedule& schedule) {
  arm_wrench_r.require_frame(Frame::kRolling);
  if (f_n < 0.0) {
    throw Error(ErrorCode::kBadInput, "normal force must be non-negative");
  }
  if (schedule.thrust(gamma, params) <= 0.0) {
    throw Error(ErrorCode::kNonPositiveThrust, "thrust schedule is non-positive at this inclination");
  }
  const double m = params.mass, g = params.gravity;
  // The arm term enters as the reaction on the vehicle, so it carries the
  // opposite sign of the resistive wheel term.
  const Eigen::Vector3d other = f_wheel - arm_wrench_r.force;
  const double along = m * a_rx_d + m * g * std::sin(gamma) * std::cos(alpha) + surf.mu_r * f_n +
                       other.x();
  const double normal = m * g * std::cos(gamma) + other.z() - f_n;
  const double tilt = std::atan2(along, normal);
  const double delta = contact_attitude(gamma, alpha).delta;

  ThrustPitchResult out;
  out.thrust = std::hypot(along, normal);
  out.theta_d = wrap_angle(tilt - delta);

  // Back-substitution into the forward and normal balances.
  out.residual_forward = out.thrust * std::sin(delta + out.theta_d) -
                         (m * a_rx_d + m * g * std::sin(gamma) * std::cos(alpha) +
                          surf.mu_r * f_n + other.x());
  out.residual_normal = f_n + out.thrust * std::cos(delta + out.theta_d) -
                        (m * g * std::cos(gamma) + other.z());
  if (std::abs(out.residual_forward) > kBalanceResidualTol ||
      std::abs(out.residual_normal) > kBalanceResidualTol) {
    throw Error(ErrorCode::kBalanceResidual,
                "thrust/pitch back-substitution residual above tolerance");
  }
  return out;
}

/// Normal-force setpoint policy: press with the force that makes the
/// scheduled thrust magnitude consistent with the force balances when
/// such a force exists, otherwise fall back to a configured minimum
/// preload (steep surfaces, where the schedule cannot carry the
/// along-slope gravity component).
inline double normal_force_setpoint(double a_rx_d, double gamma, double alpha,
                                    const Wrench& arm_wrench_r, const Eigen::Vector3d& f_wheel,
                                    const VehicleParams& params, const SurfaceModel& surf,
                                    const ThrustSchedule& schedule, double f_n_min) {
  arm_wrench_r.require_frame(Frame::kRolling);
  const double m = params.mass, g = params.gravity;
  const double u1 = schedule.thrust(gamma, params);
  const Eigen::Vector3d other = f_wheel - arm_wrench_r.force;
  const double a0 = m * a_rx_d + m * g * std::sin(gamma) * std::cos(alpha) + other.x();
  const double b0 = m * g * std::cos(gamma) + other.z();
  // (a0 + mu fn)^2 + (b0 - fn)^2 = u1^2, quadratic in fn.
  const double mu = surf.mu_r;
  const double qa = 1.0 + mu * mu;
  const double qb = 2.0 * (a0 * mu - b0);
  const double qc = a0 * a0 + b0 * b0 - u1 * u1;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    const double lo = (-qb - root) / (2.0 * qa);
    const double hi = (-qb + root) / (2.0 * qa);
    if (lo >= f_n_min) return lo;
    if (hi >= f_n_min) return hi;
  }
  return f_n_min;
}

enum class ControlMode { kAerial, kTerrestrial };

struct AttitudeGains {
  Eigen::Vector3d attitude_kp = Eigen::Vector3d(10.0, 10.0, 6.0);
  PidGains rate;
};

/// Attitude and body-rate cascade producing the torque commands, with
/// the arm interference torque cancelled. In terrestrial mode the
/// attitude layer acts in the rolling frame: roll about the heading axis
/// is owned by the contact constraint, the tilt channel tracks the pitch
/// setpoint and the yaw channel tracks a commanded heading rate; the
/// rate setpoint is then mapped into body axes.
class AttitudeRateController {
 public:
  struct TerrestrialContext {
    double beta = 0.0;        // measured tilt about the wheel axis
    double delta = 0.0;       // along-heading slope angle
    double yaw_rate_cmd = 0.0;
  };

  RotorCommand update(const AttitudeSetpoint& sp, const RigidBodyState& state,
                      const AttitudeGains& gains, double dt, ControlMode mode,
                      const Wrench& arm_wrench_body,
                      const TerrestrialContext* terr = nullptr) {
    arm_wrench_body.require_frame(Frame::kBody);
    Eigen::Vector3d rate_setpoint;
    if (mode == ControlMode::kAerial) {
      const Eigen::Vector3d att_err{wrap_angle(sp.phi_d - state.attitude.x()),
                                    wrap_angle(sp.theta_d - state.attitude.y()),
                                    wrap_angle(sp.psi_d - state.attitude.z())};
      rate_setpoint = gains.attitude_kp.cwiseProduct(att_err);
    } else {
      if (terr == nullptr) {
        throw Error(ErrorCode::kBadInput, "terrestrial attitude update needs rolling-frame context");
      }
      const double beta_d = terr->delta + sp.theta_d;
      const Eigen::Vector3d rolling_rate{0.0,
                                         gains.attitude_kp.y() * wrap_angle(beta_d - terr->beta),
                                         terr->yaw_rate_cmd};
      rate_setpoint = rot_y(-terr->beta) * rolling_rate;
    }
    const Eigen::Vector3d rate_err = rate_setpoint - state.body_rate;
    const Eigen::Vector3d torque =
        rate_pid_.update(rate_err, Eigen::Vector3d::Zero(), dt, gains.rate) - arm_wrench_body.torque;
    RotorCommand cmd;
    cmd.thrust = sp.thrust;
    cmd.torque_x = torque.x();
    cmd.torque_y = torque.y();
    cmd.torque_z = torque.z();
    return cmd;
  }

  void reset() { rate_pid_.reset(); }

 private:
  VectorPid rate_pid_;
};

}  // namespace hatm
