#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "hatm/arm_dynamics.hpp"
#include "hatm/control.hpp"
#include "hatm/errors.hpp"
#include "hatm/estimation.hpp"
#include "hatm/math_utils.hpp"
#include "hatm/sim/integrator.hpp"
#include "hatm/sim/logging.hpp"
#include "hatm/sim/metrics.hpp"
#include "hatm/sim/scenario.hpp"
#include "hatm/sim/trajectory.hpp"
#include "hatm/vehicle_model.hpp"

namespace hatm::sim {

struct SimResult {
  TrajectoryLog log;
  Metrics metrics;
  std::vector<EstimatorLogRow> estimator_inputs;
  int mode_transitions = 0;
};

/// Abort diagnostic carrying whatever was logged before the failure.
class SimAbort : public Error {
 public:
  SimAbort(const Error& cause, TrajectoryLog partial)
      : Error(cause.code(), cause.what()), partial_log(std::move(partial)) {}

  TrajectoryLog partial_log;
};

/// Closed-loop scenario runner: one sequential loop of plant integration,
/// sensor sampling, estimation and control at their configured rates.
class SimulationRunner {
 public:
  explicit SimulationRunner(Scenario scenario) : sc_(std::move(scenario)) {
    sc_.validate();
    reference_ = sc_.build_reference();
  }

  SimResult run() {
    try {
      return run_impl();
    } catch (const SimAbort&) {
      throw;
    } catch (const Error& e) {
      throw SimAbort(e, std::move(log_));
    }
  }

 private:
  struct Sensors {
    RigidBodyState state;  // noisy copy of the truth
  };

  // --- arm scripting ---------------------------------------------------

  ArmState arm_state_at(double t) const {
    JointVector q, qd, qdd;
    for (int i = 0; i < kArmJointCount; ++i) {
      q[i] = sc_.arm_trajectory.base[i];
      qd[i] = 0.0;
      qdd[i] = 0.0;
    }
    const auto& traj = sc_.arm_trajectory;
    if (t >= traj.start && traj.amplitude != 0.0) {
      const double w = 2.0 * kPi * traj.frequency;
      const double ph = w * (t - traj.start);
      for (int joint : traj.swing_joints) {
        if (joint < 1 || joint > kArmJointCount) continue;
        if (joint == kArmJointCount && !sc_.arm.joint5_actuated) continue;
        const int i = joint - 1;
        q[i] += traj.amplitude * std::sin(ph);
        qd[i] = traj.amplitude * w * std::cos(ph);
        qdd[i] = -traj.amplitude * w * w * std::sin(ph);
      }
    }
    return ArmState(q, qd, qdd);
  }

  /// Reaction wrench of the arm on the vehicle, body frame, for the given
  /// base state. Base linear/angular accelerations are the latest plant
  /// values (one integrator step behind).
  Wrench arm_wrench_body(const RigidBodyState& base, const ArmState& arm) const {
    if (!sc_.arm_enabled) return Wrench::zero(Frame::kBody);
    const Eigen::Matrix3d r_bw = base.rotation_body_to_world();
    const Eigen::Matrix3d& mount = sc_.arm.mount_rotation;
    // Craig-style gravity folding: base acceleration minus the (downward)
    // gravity acceleration, in S0.
    const Eigen::Vector3d accel_minus_g =
        mount.transpose() * (r_bw.transpose() * (last_accel_world_ + Eigen::Vector3d(0, 0, sc_.vehicle.gravity)));
    const Eigen::Vector3d omega0 = mount.transpose() * base.body_rate;
    const Eigen::Vector3d omega0_dot = mount.transpose() * last_body_rate_dot_;
    const Wrench w_s0 = newton_euler_base_wrench(arm, sc_.arm.links, sc_.arm.dh, accel_minus_g,
                                                 omega0, omega0_dot, Wrench::zero(Frame::kS5));
    return Wrench{mount * w_s0.force, mount * w_s0.torque, Frame::kBody};
  }

  // --- terrestrial frame bookkeeping ------------------------------------

  Eigen::Vector3d surface_e1() const {
    const double g = sc_.surface.gamma;
    return {std::cos(g), 0.0, std::sin(g)};  // uphill tangent
  }

  static Eigen::Vector3d surface_e2() { return Eigen::Vector3d::UnitY(); }

  double heading_from_attitude(const Eigen::Matrix3d& r_bw) const {
    const Eigen::Vector3d y_b = r_bw.col(1);
    const Eigen::Vector3d n = sc_.surface.normal();
    Eigen::Vector3d x_r = y_b.cross(n);
    if (x_r.norm() < 1e-9) return 0.0;
    x_r.normalize();
    return std::atan2(x_r.dot(surface_e2()), x_r.dot(surface_e1()));
  }

  double tilt_from_attitude(const Eigen::Matrix3d& r_bw, double gamma, double alpha) const {
    const Eigen::Matrix3d r_wr = rot_z(-alpha) * rot_y(gamma);
    const Eigen::Matrix3d r_br = r_wr * r_bw;
    return std::atan2(r_br(0, 2), r_br(2, 2));
  }

  /// Full rigid-body state implied by the constrained rolling state.
  RigidBodyState rigid_state_from_terrestrial(const Eigen::Vector3d& position,
                                              const TerrestrialState& terr) const {
    RigidBodyState s;
    s.position = position;
    const Eigen::Matrix3d r_wr = rot_z(-terr.alpha) * rot_y(sc_.surface.gamma);
    const Eigen::Matrix3d r_bw = r_wr.transpose() * rot_y(terr.beta);
    s.attitude = matrix_to_euler_zyx(r_bw);
    s.velocity = terr.v_rx * r_wr.transpose().col(0);
    const double sb = std::sin(terr.beta), cb = std::cos(terr.beta);
    s.body_rate = Eigen::Vector3d(-terr.alpha_rate * sb, terr.beta_rate, terr.alpha_rate * cb);
    return s;
  }

  // --- noise -------------------------------------------------------------

  RigidBodyState sample_sensors(const RigidBodyState& truth) {
    if (!sc_.noise.enabled) return truth;
    RigidBodyState m = truth;
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int i = 0; i < 3; ++i) m.position[i] += sc_.noise.pos_sigma * n01(rng_);
    for (int i = 0; i < 3; ++i) m.velocity[i] += sc_.noise.vel_sigma * n01(rng_);
    for (int i = 0; i < 3; ++i) m.attitude[i] += sc_.noise.att_sigma * n01(rng_);
    for (int i = 0; i < 3; ++i) m.body_rate[i] += sc_.noise.rate_sigma * n01(rng_);
    return m;
  }

  // --- main loop ---------------------------------------------------------

  SimResult run_impl() {
    const double dt = 1.0 / sc_.integrator_rate;
    const int steps = static_cast<int>(std::llround(sc_.duration * sc_.integrator_rate));
    const int control_every = sc_.integrator_rate / sc_.control_rate;
    const int estimator_every = sc_.integrator_rate / sc_.estimator_rate;
    const int log_every = std::max(1, static_cast<int>(std::llround(sc_.integrator_rate / sc_.log_rate)));
    const double dt_control = control_every * dt;

    rng_.seed(sc_.noise.seed);
    mode_ = sc_.initial.mode;
    truth_.position = sc_.initial.position;
    truth_.attitude = Eigen::Vector3d(0.0, 0.0, sc_.initial.yaw);
    truth_.velocity.setZero();
    truth_.body_rate.setZero();
    terr_ = TerrestrialState{};
    if (mode_ == ControlMode::kTerrestrial) enter_terrestrial(sc_.initial.alpha, sc_.initial.v_rx);

    effective_params_ = sc_.vehicle;
    last_accel_world_.setZero();
    last_body_rate_dot_.setZero();

    std::optional<MovingHorizonEstimator> estimator;
    if (sc_.estimator.enabled) {
      MovingHorizonEstimator::Config cfg;
      cfg.horizon = sc_.estimator.horizon;
      cfg.period = 1.0 / sc_.estimator_rate;
      cfg.params = EstimatorParams{sc_.vehicle.mass, sc_.vehicle.gravity};
      cfg.noise.process = sc_.estimator.q_diag.asDiagonal();
      cfg.noise.measurement = sc_.estimator.r_diag.asDiagonal();
      cfg.solver.max_iterations = sc_.estimator.max_iterations;
      cfg.solver.gradient_tolerance = sc_.estimator.gradient_tolerance;
      cfg.force_noise_floor = sc_.estimator.force_floor;
      estimator.emplace(cfg);
      AugmentedState prior;
      prior.position = truth_.position;
      prior.velocity = truth_.velocity;
      AugVector p0;
      p0 << 1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 25.0, 25.0, 25.0;
      estimator->set_prior(prior, p0.asDiagonal());
    }

    SimResult result;
    if (steps == 0) return result;  // zero-duration run: empty log, zero metrics
    RotorCommand cmd;  // zero until the first control tick
    double last_transition_time = -1e9;
    std::size_t next_schedule = 0;

    for (int k = 0; k <= steps; ++k) {
      const double t = k * dt;
      const ArmState arm = arm_state_at(t);

      // Scripted mode switches.
      if (sc_.mode_policy == ModePolicy::kScripted) {
        while (next_schedule < sc_.mode_schedule.size() &&
               t >= sc_.mode_schedule[next_schedule].time - 0.5 * dt) {
          const ControlMode target = sc_.mode_schedule[next_schedule].mode;
          if (target != mode_) {
            switch_mode(target);
            ++result.mode_transitions;
            last_transition_time = t;
          }
          ++next_schedule;
        }
      }

      // Control tick.
      if (k % control_every == 0) {
        const RigidBodyState meas = sample_sensors(truth_);
        const ArmState arm_meas = arm;  // joint encoders are treated as exact
        const Wrench w_body_plant = arm_wrench_body(truth_, arm);
        const Wrench w_body_meas = arm_wrench_body(meas, arm_meas);
        const Wrench w_for_control =
            sc_.control.compensate_arm ? w_body_meas : Wrench::zero(Frame::kBody);

        // Fold the arm configuration into the rigid-body inertia.
        if (sc_.arm_enabled) {
          const CompositeInertia ci = arm_composite_inertia(arm, sc_.arm.links, sc_.arm.dh);
          const Eigen::Matrix3d& mount = sc_.arm.mount_rotation;
          effective_params_.inertia =
              sc_.vehicle.inertia + mount * ci.inertia * mount.transpose();
        }

        if (sc_.mode_policy == ModePolicy::kAuto) {
          maybe_auto_switch(t, cmd, w_body_plant, last_transition_time, result.mode_transitions);
        }

        const ReferenceState ref = reference_.at(t);
        if (mode_ == ControlMode::kAerial) {
          cmd = aerial_control_tick(meas, ref, w_for_control, dt_control);
        } else {
          cmd = terrestrial_control_tick(meas, ref, w_for_control, t, dt_control);
        }
        cmd = cmd.clamped(effective_params_);
        last_cmd_ = cmd;
      }

      // Estimator tick.
      if (estimator && k % estimator_every == 0) {
        const RigidBodyState meas = sample_sensors(truth_);
        MeasVector y;
        y << meas.position, meas.velocity, last_cmd_.thrust, meas.attitude;
        EstimatorInput u;
        u.thrust = last_cmd_.thrust;
        u.roll = meas.attitude.x();
        u.pitch = meas.attitude.y();
        u.yaw = meas.attitude.z();
        const Wrench w_body = arm_wrench_body(meas, arm);
        const Eigen::Vector3d known_accel =
            meas.rotation_body_to_world() * w_body.force / sc_.vehicle.mass;
        result.estimator_inputs.push_back(EstimatorLogRow{t, y, u});
        if (auto sol = estimator->step(t, y, u, known_accel)) {
          last_estimate_full_ = sol->trajectory.back().vector();
          last_mhe_cost_ = sol->diagnostics.cost;
          last_mhe_iterations_ = sol->diagnostics.iterations;
          estimate_valid_ = true;
          if (auto gh = estimator->inclination(*sol)) {
            gamma_hat_ = *gh;
            gamma_hat_valid_ = true;
          } else {
            gamma_hat_valid_ = false;
          }
        }
      }

      // Log.
      if (k % log_every == 0) log_record(t);

      if (k == steps) break;

      // Plant integration over one step, commands zero-order-held.
      integrate_plant(t, dt, arm);
    }

    result.log = std::move(log_);
    if (!result.log.records.empty()) {
      result.metrics = compute_tracking_metrics(result.log, sc_.settle_time, sc_.surface.gamma);
    }
    return result;
  }

  // --- control ticks -----------------------------------------------------

  RotorCommand aerial_control_tick(const RigidBodyState& meas, const ReferenceState& ref,
                                   const Wrench& w_body, double dt) {
    const Eigen::Vector3d f_d = aerial_position_control(aerial_cascade_, meas, ref,
                                                        sc_.control.position, sc_.control.velocity,
                                                        dt, sc_.vehicle.mass);
    const Eigen::Vector3d f_arm_world = meas.rotation_body_to_world() * w_body.force;
    AttitudeSetpoint sp = attitude_determination(f_d, meas.attitude.z(), f_arm_world, sc_.vehicle);
    sp.psi_d = ref.yaw;
    sp.phi_d = std::clamp(sp.phi_d, -sc_.control.tilt_limit, sc_.control.tilt_limit);
    sp.theta_d = std::clamp(sp.theta_d, -sc_.control.tilt_limit, sc_.control.tilt_limit);
    return attitude_controller_.update(sp, meas, attitude_gains(), dt, ControlMode::kAerial, w_body);
  }

  RotorCommand terrestrial_control_tick(const RigidBodyState& meas, const ReferenceState& ref,
                                        const Wrench& w_body, double t, double dt) {
    const double gamma = (sc_.control.use_estimated_gamma && gamma_hat_valid_)
                             ? gamma_hat_
                             : sc_.surface.gamma;
    const Eigen::Matrix3d r_bw = meas.rotation_body_to_world();
    const double alpha = heading_from_attitude(r_bw);
    const double beta = tilt_from_attitude(r_bw, gamma, alpha);
    const ContactAngles angles = contact_attitude(gamma, alpha);
    const auto rots = rolling_rotations(gamma, alpha, meas.attitude.z(), angles.delta,
                                        beta - angles.delta);

    const Wrench w_rolling{rots.body_to_rolling * w_body.force,
                           rots.body_to_rolling * w_body.torque, Frame::kRolling};

    const double a_rx_d = terrestrial_position_control(terrestrial_cascade_, meas, ref,
                                                       sc_.control.position, sc_.control.velocity,
                                                       rots.world_to_rolling, dt);
    const double wheel_term =
        2.0 * sc_.vehicle.wheel_inertia / (sc_.vehicle.wheel_radius * sc_.vehicle.wheel_radius);
    const Eigen::Vector3d f_wheel(wheel_term * a_rx_d, 0.0, 0.0);
    const double f_n_sp =
        normal_force_setpoint(a_rx_d, gamma, alpha, w_rolling, f_wheel, sc_.vehicle, sc_.surface,
                              sc_.control.thrust_schedule, sc_.control.normal_force_min);
    const ThrustPitchResult tp =
        thrust_pitch_determination(a_rx_d, gamma, alpha, f_n_sp, w_rolling, f_wheel, sc_.vehicle,
                                   sc_.surface, sc_.control.thrust_schedule);

    // Line-of-sight heading guidance toward the (optionally led) reference.
    const ReferenceState target = reference_.at(t + sc_.control.lookahead);
    const Eigen::Vector2d pos2{meas.position.dot(surface_e1()), meas.position.dot(surface_e2())};
    const Eigen::Vector2d tgt2{target.position.dot(surface_e1()), target.position.dot(surface_e2())};
    const Eigen::Vector2d vel2{meas.velocity.dot(surface_e1()), meas.velocity.dot(surface_e2())};
    const double yaw_rate_cmd = los_.update(pos2, tgt2, vel2, gamma, dt, sc_.control.los);

    AttitudeSetpoint sp;
    sp.theta_d = tp.theta_d;
    sp.thrust = tp.thrust;
    sp.psi_d = meas.attitude.z();
    AttitudeRateController::TerrestrialContext ctx;
    ctx.beta = beta;
    ctx.delta = angles.delta;
    ctx.yaw_rate_cmd = yaw_rate_cmd;
    return attitude_controller_.update(sp, meas, attitude_gains(), dt, ControlMode::kTerrestrial,
                                       w_body, &ctx);
  }

  AttitudeGains attitude_gains() const {
    AttitudeGains g;
    g.attitude_kp = sc_.control.attitude_kp;
    g.rate = sc_.control.rate;
    return g;
  }

  // --- mode switching ------------------------------------------------------

  void enter_terrestrial(double alpha, double v_rx) {
    const Eigen::Vector3d n = sc_.surface.normal();
    // Snap onto the contact manifold.
    const double clearance = truth_.position.dot(n) - sc_.vehicle.wheel_radius;
    truth_.position -= clearance * n;
    terr_ = TerrestrialState{};
    terr_.alpha = alpha;
    terr_.beta = contact_attitude(sc_.surface.gamma, alpha).delta;
    terr_.v_rx = v_rx;
    truth_ = rigid_state_from_terrestrial(truth_.position, terr_);
    terrestrial_cascade_.reset();
    los_.reset();
    mode_ = ControlMode::kTerrestrial;
  }

  void capture_terrestrial_from_flight() {
    const Eigen::Matrix3d r_bw = truth_.rotation_body_to_world();
    const Eigen::Vector3d n = sc_.surface.normal();
    const double alpha = heading_from_attitude(r_bw);
    TerrestrialState terr;
    terr.alpha = alpha;
    terr.beta = tilt_from_attitude(r_bw, sc_.surface.gamma, alpha);
    const Eigen::Matrix3d r_wr = rot_z(-alpha) * rot_y(sc_.surface.gamma);
    const Eigen::Vector3d x_r = r_wr.transpose().col(0);
    terr.v_rx = truth_.velocity.dot(x_r);
    const Eigen::Vector3d omega_world = r_bw * truth_.body_rate;
    terr.alpha_rate = omega_world.dot(n);
    terr.beta_rate = omega_world.dot(r_bw.col(1));
    terr_ = terr;
    const double clearance = truth_.position.dot(n) - sc_.vehicle.wheel_radius;
    truth_.position -= clearance * n;
    truth_ = rigid_state_from_terrestrial(truth_.position, terr_);
    terrestrial_cascade_.reset();
    los_.reset();
    mode_ = ControlMode::kTerrestrial;
  }

  void leave_terrestrial() {
    truth_ = rigid_state_from_terrestrial(truth_.position, terr_);
    aerial_cascade_.reset();
    mode_ = ControlMode::kAerial;
  }

  void switch_mode(ControlMode target) {
    if (target == mode_) return;
    if (target == ControlMode::kTerrestrial) {
      capture_terrestrial_from_flight();
    } else {
      leave_terrestrial();
    }
    attitude_controller_.reset();
  }

  void maybe_auto_switch(double t, const RotorCommand& cmd, const Wrench& w_body_plant,
                         double& last_transition_time, int& transitions) {
    if (t - last_transition_time < sc_.mode_debounce) return;
    const Eigen::Vector3d n = sc_.surface.normal();
    if (mode_ == ControlMode::kAerial) {
      const double clearance = truth_.position.dot(n) - sc_.vehicle.wheel_radius;
      if (clearance <= 0.0) {
        // Probe the normal force the rolling constraint would see.
        const Eigen::Matrix3d r_bw = truth_.rotation_body_to_world();
        const double alpha = heading_from_attitude(r_bw);
        TerrestrialState probe;
        probe.alpha = alpha;
        probe.beta = tilt_from_attitude(r_bw, sc_.surface.gamma, alpha);
        const Wrench w_r{rot_y(probe.beta) * w_body_plant.force,
                         rot_y(probe.beta) * w_body_plant.torque, Frame::kRolling};
        SurfaceModel surf = sc_.surface;
        surf.in_contact = true;
        if (probe_normal_force(probe, cmd, w_r, surf, effective_params_) >= 0.0) {
          switch_mode(ControlMode::kTerrestrial);
          ++transitions;
          last_transition_time = t;
        }
      }
    } else {
      const Wrench w_r{rot_y(terr_.beta) * w_body_plant.force,
                       rot_y(terr_.beta) * w_body_plant.torque, Frame::kRolling};
      SurfaceModel surf = sc_.surface;
      surf.in_contact = true;
      if (probe_normal_force(terr_, cmd, w_r, surf, effective_params_) < 0.0) {
        switch_mode(ControlMode::kAerial);
        ++transitions;
        last_transition_time = t;
      }
    }
  }

  // --- plant -----------------------------------------------------------

  void integrate_plant(double t, double dt, const ArmState& arm) {
    const Wrench w_body = arm_wrench_body(truth_, arm);
    if (mode_ == ControlMode::kAerial) {
      Eigen::VectorXd x(12);
      x << truth_.position, truth_.velocity, truth_.attitude, truth_.body_rate;
      AerialDerivatives last{};
      const auto deriv = [&](const Eigen::VectorXd& v) {
        RigidBodyState s;
        s.position = v.segment<3>(0);
        s.velocity = v.segment<3>(3);
        s.attitude = v.segment<3>(6);
        s.body_rate = v.segment<3>(9);
        last = aerial_derivatives(s, last_cmd_, w_body, effective_params_);
        Eigen::VectorXd d(12);
        d << last.position_dot, last.velocity_dot, last.attitude_dot, last.body_rate_dot;
        return d;
      };
      const Eigen::VectorXd next = integrate_step(x, deriv, dt);
      truth_.position = next.segment<3>(0);
      truth_.velocity = next.segment<3>(3);
      truth_.attitude = next.segment<3>(6);
      truth_.attitude.z() = wrap_angle(truth_.attitude.z());
      truth_.body_rate = next.segment<3>(9);
      last_accel_world_ = last.velocity_dot;
      last_body_rate_dot_ = last.body_rate_dot;
    } else {
      SurfaceModel surf = sc_.surface;
      surf.in_contact = true;
      const Wrench w_r{rot_y(terr_.beta) * w_body.force, rot_y(terr_.beta) * w_body.torque,
                       Frame::kRolling};
      Eigen::VectorXd x(8);
      x << truth_.position, terr_.alpha, terr_.alpha_rate, terr_.beta, terr_.beta_rate, terr_.v_rx;
      TerrestrialDerivatives last{};
      const auto deriv = [&](const Eigen::VectorXd& v) {
        TerrestrialState s;
        s.alpha = v[3];
        s.alpha_rate = v[4];
        s.beta = v[5];
        s.beta_rate = v[6];
        s.v_rx = v[7];
        s.f_left = terr_.f_left;
        s.f_right = terr_.f_right;
        RigidBodyState rb = truth_;
        rb.position = v.segment<3>(0);
        last = terrestrial_derivatives(rb, s, last_cmd_, w_r, surf, effective_params_);
        Eigen::VectorXd d(8);
        d << last.position_dot, last.alpha_dot, last.alpha_ddot, last.beta_dot, last.beta_ddot,
            last.v_rx_dot;
        return d;
      };
      Eigen::VectorXd next;
      try {
        next = integrate_step(x, deriv, dt);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kContactLost && sc_.mode_policy == ModePolicy::kAuto) {
          leave_terrestrial();
          return;
        }
        throw;
      }
      truth_.position = next.segment<3>(0);
      terr_.alpha = next[3];
      terr_.alpha_rate = next[4];
      terr_.beta = next[5];
      terr_.beta_rate = next[6];
      terr_.v_rx = next[7];
      terr_.f_n = last.f_n;
      terr_.f_left = last.f_left;
      terr_.f_right = last.f_right;
      slip_ = last.slip;
      // Keep the position exactly on the contact manifold.
      const Eigen::Vector3d n = sc_.surface.normal();
      const double clearance = truth_.position.dot(n) - sc_.vehicle.wheel_radius;
      truth_.position -= clearance * n;
      truth_ = rigid_state_from_terrestrial(truth_.position, terr_);
      const Eigen::Matrix3d r_wr = rot_z(-terr_.alpha) * rot_y(sc_.surface.gamma);
      const Eigen::Vector3d x_r = r_wr.transpose().col(0);
      const Eigen::Vector3d y_r = r_wr.transpose().col(1);
      last_accel_world_ = last.v_rx_dot * x_r + terr_.v_rx * terr_.alpha_rate * y_r;
      const double sb = std::sin(terr_.beta), cb = std::cos(terr_.beta);
      last_body_rate_dot_ =
          Eigen::Vector3d(-last.alpha_ddot * sb - terr_.alpha_rate * terr_.beta_rate * cb,
                          last.beta_ddot,
                          last.alpha_ddot * cb - terr_.alpha_rate * terr_.beta_rate * sb);
    }
    (void)t;
  }

  void log_record(double t) {
    LogRecord r;
    r.time = t;
    r.mode = mode_ == ControlMode::kTerrestrial ? 1 : 0;
    r.position = truth_.position;
    r.velocity = truth_.velocity;
    r.attitude = truth_.attitude;
    r.body_rate = truth_.body_rate;
    const ReferenceState ref = reference_.at(t);
    r.ref_position = ref.position;
    r.ref_yaw = ref.yaw;
    r.u1 = last_cmd_.thrust;
    r.u2 = last_cmd_.torque_x;
    r.u3 = last_cmd_.torque_y;
    r.u4 = last_cmd_.torque_z;
    r.f_n = terr_.f_n;
    r.f_left = terr_.f_left;
    r.f_right = terr_.f_right;
    r.slip = slip_ ? 1 : 0;
    r.contact = mode_ == ControlMode::kTerrestrial ? 1 : 0;
    r.alpha = terr_.alpha;
    r.beta = terr_.beta;
    r.v_rx = terr_.v_rx;
    const Wrench w_body = arm_wrench_body(truth_, arm_state_at(t));
    r.arm_force = w_body.force;
    r.arm_torque = w_body.torque;
    r.est_valid = (estimate_valid_ && gamma_hat_valid_) ? 1 : 0;
    r.estimate = last_estimate_full_;
    r.gamma_hat = gamma_hat_valid_ ? gamma_hat_ : 0.0;
    r.mhe_cost = last_mhe_cost_;
    r.mhe_iterations = last_mhe_iterations_;
    log_.records.push_back(r);
  }

  Scenario sc_;
  ReferenceTrajectory reference_ = ReferenceTrajectory::hover(Eigen::Vector3d::Zero(), 0.0);
  std::mt19937_64 rng_;

  ControlMode mode_ = ControlMode::kAerial;
  RigidBodyState truth_;
  TerrestrialState terr_;
  bool slip_ = false;
  VehicleParams effective_params_;
  RotorCommand last_cmd_;
  Eigen::Vector3d last_accel_world_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d last_body_rate_dot_ = Eigen::Vector3d::Zero();

  PositionCascade aerial_cascade_;
  PositionCascade terrestrial_cascade_;
  AttitudeRateController attitude_controller_;
  LosYawGuidance los_;

  AugVector last_estimate_full_ = AugVector::Zero();
  double last_mhe_cost_ = 0.0;
  int last_mhe_iterations_ = 0;
  bool estimate_valid_ = false;
  double gamma_hat_ = 0.0;
  bool gamma_hat_valid_ = false;

  TrajectoryLog log_;
};

inline SimResult run_scenario(const Scenario& scenario) {
  SimulationRunner runner(scenario);
  return runner.run();
}

}  // namespace hatm::sim
