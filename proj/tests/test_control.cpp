#include "hatm/control.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace hatm;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

PidGains p_only(const Vector3d& kp) {
  PidGains g;
  g.kp = kp;
  g.integral_limit = 10.0;
  return g;
}

}  // namespace

TEST(AerialPositionControl, OnReferencePassesFeedforwardThrough) {
  PositionCascade cascade;
  const VehicleParams p = VehicleParams::standard();
  RigidBodyState state;
  state.position = Vector3d(1, 2, 3);
  state.velocity = Vector3d(0.1, 0, -0.2);
  ReferenceState ref;
  ref.position = state.position;
  ref.velocity = state.velocity;
  ref.acceleration = Vector3d(0.3, -0.1, 0.2);
  const Vector3d f = aerial_position_control(cascade, state, ref, p_only({3, 3, 4}),
                                             p_only({4, 4, 5}), 0.004, p.mass);
  EXPECT_LT((f - p.mass * ref.acceleration).norm(), 1e-12);
}

TEST(AerialPositionControl, HoverZeroErrorZeroForce) {
  PositionCascade cascade;
  const VehicleParams p = VehicleParams::standard();
  RigidBodyState state;
  state.position = Vector3d(0, 0, 1);
  ReferenceState ref;
  ref.position = state.position;
  const Vector3d f = aerial_position_control(cascade, state, ref, p_only({3, 3, 4}),
                                             p_only({4, 4, 5}), 0.004, p.mass);
  EXPECT_LT(f.norm(), 1e-12);
}

// Cascade algebra: a pure position step with proportional-only loops
// multiplies through both gains.
TEST(AerialPositionControl, StepErrorCascadeAlgebra) {
  PositionCascade cascade;
  const VehicleParams p = VehicleParams::standard();
  RigidBodyState state;
  ReferenceState ref;
  ref.position = Vector3d(0.2, -0.1, 0.05);
  const Vector3d kp_p{3, 3, 4}, kp_v{4, 4, 5};
  const Vector3d f =
      aerial_position_control(cascade, state, ref, p_only(kp_p), p_only(kp_v), 0.004, p.mass);
  const Vector3d expected = p.mass * kp_v.cwiseProduct(kp_p.cwiseProduct(ref.position));
  EXPECT_LT((f - expected).norm(), 1e-12);
}

TEST(AttitudeDetermination, HoverSetpoint) {
  const VehicleParams p = VehicleParams::standard();
  const auto sp = attitude_determination(Vector3d::Zero(), 0.0, Vector3d::Zero(), p);
  EXPECT_DOUBLE_EQ(sp.phi_d, 0.0);
  EXPECT_DOUBLE_EQ(sp.theta_d, 0.0);
  EXPECT_NEAR(sp.thrust, p.mass * p.gravity, 1e-12);
}

TEST(AttitudeDetermination, PlanarReduction) {
  const VehicleParams p = VehicleParams::standard();
  const double a = 3.0;
  const auto sp = attitude_determination(Vector3d(a, 0, 0), 0.0, Vector3d::Zero(), p);
  EXPECT_NEAR(sp.theta_d, std::atan(a / (p.mass * p.gravity)), 1e-14);
  EXPECT_NEAR(sp.phi_d, 0.0, 1e-14);
}

// At yaw 90 deg a world-x force maps onto the roll axis. The sign follows
// the standard Z-Y-X convention (positive roll tilts thrust toward -y_b,
// i.e. toward world +x here), which the reconstruction identity fixes.
TEST(AttitudeDetermination, YawedForceMapsToRoll) {
  const VehicleParams p = VehicleParams::standard();
  const double a = 3.0;
  const auto sp = attitude_determination(Vector3d(a, 0, 0), kPi / 2, Vector3d::Zero(), p);
  EXPECT_NEAR(sp.theta_d, 0.0, 1e-14);
  EXPECT_NEAR(std::abs(sp.phi_d), std::atan(a / (p.mass * p.gravity)), 1e-14);
  const Matrix3d r = euler_zyx_to_matrix(sp.phi_d, sp.theta_d, kPi / 2);
  const Vector3d reconstructed =
      r * Vector3d(0, 0, sp.thrust) - Vector3d(0, 0, p.mass * p.gravity);
  EXPECT_LT((reconstructed - Vector3d(a, 0, 0)).norm(), 1e-9);
}

// The defining property: the returned attitude and thrust reconstruct
// the requested net force exactly, arm compensation included.
TEST(AttitudeDetermination, InverseMapConsistency) {
  const VehicleParams p = VehicleParams::standard();
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int tested = 0;
  while (tested < 2000) {
    const Vector3d f_d{8.0 * u(rng), 8.0 * u(rng), 6.0 * u(rng)};
    const Vector3d f_arm{u(rng), u(rng), u(rng)};
    const double psi = kPi * u(rng);
    AttitudeSetpoint sp;
    try {
      sp = attitude_determination(f_d, psi, f_arm, p);
    } catch (const Error&) {
      continue;
    }
    if (std::abs(sp.phi_d) > deg_to_rad(45.0) || std::abs(sp.theta_d) > deg_to_rad(45.0)) continue;
    const Matrix3d r = euler_zyx_to_matrix(sp.phi_d, sp.theta_d, psi);
    const Vector3d reconstructed =
        r * Vector3d(0, 0, sp.thrust) - Vector3d(0, 0, p.mass * p.gravity) + f_arm;
    EXPECT_LT((reconstructed - f_d).norm(), 1e-9);
    ++tested;
  }
}

TEST(AttitudeDetermination, NonPositiveDenominatorThrows) {
  const VehicleParams p = VehicleParams::standard();
  EXPECT_THROW(attitude_determination(Vector3d(0, 0, -2 * p.mass * p.gravity), 0.0,
                                      Vector3d::Zero(), p),
               Error);
}

TEST(TerrestrialPositionControl, AlignedProjection) {
  PositionCascade cascade;
  RigidBodyState state;
  ReferenceState ref;
  ref.acceleration = Vector3d(0.25, 0, 0);
  // Flat ground, heading along world x: rolling x equals world x.
  const Matrix3d r_wr = Matrix3d::Identity();
  const double a = terrestrial_position_control(cascade, state, ref, p_only({3, 3, 4}),
                                                p_only({4, 4, 5}), r_wr, 0.004);
  EXPECT_NEAR(a, 0.25, 1e-12);
}

TEST(TerrestrialPositionControl, LateralComponentDiscarded) {
  PositionCascade cascade;
  RigidBodyState state;
  ReferenceState ref;
  ref.acceleration = Vector3d(0, 0.4, 0);  // purely lateral in the rolling frame
  const Matrix3d r_wr = Matrix3d::Identity();
  const double a = terrestrial_position_control(cascade, state, ref, p_only({3, 3, 4}),
                                                p_only({4, 4, 5}), r_wr, 0.004);
  EXPECT_NEAR(a, 0.0, 1e-12);
}

TEST(TerrestrialPositionControl, SlopeProjectionMatchesRotationRow) {
  PositionCascade cascade;
  RigidBodyState state;
  ReferenceState ref;
  ref.acceleration = Vector3d(0.2, 0, 0.1);
  const double gamma = kPi / 6;
  const auto rots = rolling_rotations(gamma, 0.0, 0.0, contact_attitude(gamma, 0.0).delta, 0.0);
  const double a = terrestrial_position_control(cascade, state, ref, p_only({3, 3, 4}),
                                                p_only({4, 4, 5}), rots.world_to_rolling, 0.004);
  EXPECT_NEAR(a, (rots.world_to_rolling * ref.acceleration).x(), 1e-14);
}

TEST(YawGainSchedule, PinnedValues) {
  const YawGainSchedule s;
  EXPECT_NEAR(s.gain(0.0), 1.1051, 1e-12);
  EXPECT_NEAR(s.gain(deg_to_rad(30.0)), 5.2151, 1e-12);
}

TEST(YawGainSchedule, AffineInDegrees) {
  const YawGainSchedule s;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, kPi / 2);
  for (int i = 0; i < 100; ++i) {
    const double g1 = u(rng), g2 = u(rng);
    EXPECT_NEAR(s.gain(g1) - s.gain(g2), 0.137 * (rad_to_deg(g1) - rad_to_deg(g2)), 1e-12);
  }
}

TEST(LosYawGuidance, TargetAheadStraightMotionNoCommand) {
  LosYawGuidance los;
  LosYawGuidance::Config cfg;
  double cmd = 0.0;
  // Vehicle driving along +x toward a target fixed ahead: the sight line
  // direction never changes.
  for (int k = 0; k < 100; ++k) {
    const double x = 0.01 * k;
    cmd = los.update({x, 0.0}, {10.0, 0.0}, {1.0, 0.0}, 0.0, 0.004, cfg);
  }
  EXPECT_NEAR(cmd, 0.0, 1e-12);
}

TEST(LosYawGuidance, DeadbandSilencesCommand) {
  LosYawGuidance los;
  LosYawGuidance::Config cfg;
  cfg.deadband = 0.5;
  const double cmd = los.update({0.0, 0.0}, {0.1, 0.1}, {0, 0}, 0.0, 0.004, cfg);
  EXPECT_DOUBLE_EQ(cmd, 0.0);
}

TEST(LosYawGuidance, RotatingSightLineScaledByGain) {
  LosYawGuidance los;
  LosYawGuidance::Config cfg;
  cfg.lowpass_cutoff = 1e6;  // effectively unfiltered for the check
  const double dt = 0.004;
  const double omega = 0.5;  // sight line rotation rate
  double cmd = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double q = omega * k * dt;
    cmd = los.update({0.0, 0.0}, {2 * std::cos(q), 2 * std::sin(q)}, {0, 0}, 0.0, dt, cfg);
  }
  EXPECT_NEAR(cmd, cfg.schedule.gain(0.0) * omega, 1e-6);
}

TEST(ThrustSchedule, FlatGroundPinnedValue) {
  const ThrustSchedule s;
  const VehicleParams p = VehicleParams::standard();
  EXPECT_NEAR(s.thrust(0.0, p), 0.6728 * p.mass * p.gravity, 1e-12);
}

TEST(ThrustPitchDetermination, FlatGroundRestIsLevel) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  surf.mu_r = 0.0;
  const ThrustSchedule sched;
  // Normal force consistent with the scheduled thrust on flat ground.
  const double f_n = p.mass * p.gravity - sched.thrust(0.0, p);
  const auto r = thrust_pitch_determination(0.0, 0.0, 0.0, f_n, Wrench::zero(Frame::kRolling),
                                            Vector3d::Zero(), p, surf, sched);
  EXPECT_NEAR(r.theta_d, 0.0, 1e-14);
  EXPECT_NEAR(r.thrust, sched.thrust(0.0, p), 1e-12);
  EXPECT_NEAR(r.thrust, 0.6728 * p.mass * p.gravity, 1e-9);
}

// Root-finding oracle on the coupled forward/normal balance: solve for
// (tilt, U1) with a generic bivariate Newton iteration and compare.
TEST(ThrustPitchDetermination, MatchesNumericRootFinder) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  const ThrustSchedule sched;
  const double gamma = kPi / 6, a_rx_d = 0.2, alpha = 0.0;
  const double wheel_term = 2 * p.wheel_inertia / (p.wheel_radius * p.wheel_radius);
  const Vector3d f_wheel(wheel_term * a_rx_d, 0, 0);
  const double f_n = normal_force_setpoint(a_rx_d, gamma, alpha, Wrench::zero(Frame::kRolling),
                                           f_wheel, p, surf, sched, 2.0);
  const auto r = thrust_pitch_determination(a_rx_d, gamma, alpha, f_n,
                                            Wrench::zero(Frame::kRolling), f_wheel, p, surf, sched);

  const double mg = p.mass * p.gravity;
  const auto residual = [&](const Eigen::Vector2d& x) {
    const double tilt = x[0], u1 = x[1];
    Eigen::Vector2d out;
    out[0] = u1 * std::sin(tilt) -
             (p.mass * a_rx_d + mg * std::sin(gamma) * std::cos(alpha) + surf.mu_r * f_n +
              f_wheel.x());
    out[1] = f_n + u1 * std::cos(tilt) - mg * std::cos(gamma);
    return out;
  };
  const Eigen::Vector2d sol = oracles::newton2(residual, {0.5, 15.0});
  const double delta = contact_attitude(gamma, alpha).delta;
  EXPECT_NEAR(r.theta_d, sol[0] - delta, 1e-8);
  EXPECT_NEAR(r.thrust, sol[1], 1e-8);
  EXPECT_LT(std::abs(r.residual_forward), 1e-10);
  EXPECT_LT(std::abs(r.residual_normal), 1e-10);
}

// Grid required by the coupled-balance acceptance criterion.
TEST(ThrustPitchDetermination, BalanceResidualOnInclinationGrid) {
  const VehicleParams p = VehicleParams::standard();
  const ThrustSchedule sched;
  for (double gamma_deg : {0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0}) {
    for (double a_rx_d : {-0.5, 0.0, 0.5}) {
      SurfaceModel surf;
      surf.in_contact = true;
      surf.gamma = deg_to_rad(gamma_deg);
      const double wheel_term = 2 * p.wheel_inertia / (p.wheel_radius * p.wheel_radius);
      const Vector3d f_wheel(wheel_term * a_rx_d, 0, 0);
      const double f_n = normal_force_setpoint(a_rx_d, surf.gamma, 0.0,
                                               Wrench::zero(Frame::kRolling), f_wheel, p, surf,
                                               sched, 2.0);
      const auto r = thrust_pitch_determination(a_rx_d, surf.gamma, 0.0, f_n,
                                                Wrench::zero(Frame::kRolling), f_wheel, p, surf,
                                                sched);
      EXPECT_LT(std::abs(r.residual_forward), 1e-8) << gamma_deg << " " << a_rx_d;
      EXPECT_LT(std::abs(r.residual_normal), 1e-8) << gamma_deg << " " << a_rx_d;
      EXPECT_GT(r.thrust, 0.0);
    }
  }
}

TEST(ThrustPitchDetermination, NegativeScheduleThrows) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  ThrustSchedule sched;
  sched.c0 = -1.0;
  sched.c1 = 0.0;
  sched.c2 = 0.0;
  EXPECT_THROW(thrust_pitch_determination(0.0, 0.0, 0.0, 1.0, Wrench::zero(Frame::kRolling),
                                          Vector3d::Zero(), p, surf, sched),
               Error);
}

TEST(NormalForceSetpoint, FlatGroundPicksScheduleConsistentRoot) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  surf.mu_r = 0.0;
  const ThrustSchedule sched;
  const double f_n = normal_force_setpoint(0.0, 0.0, 0.0, Wrench::zero(Frame::kRolling),
                                           Vector3d::Zero(), p, surf, sched, 0.5);
  EXPECT_NEAR(f_n, p.mass * p.gravity - sched.thrust(0.0, p), 1e-9);
}

TEST(NormalForceSetpoint, SteepSlopeFallsBackToPreload) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  surf.gamma = deg_to_rad(75.0);
  const ThrustSchedule sched;
  const double f_n = normal_force_setpoint(0.0, surf.gamma, 0.0, Wrench::zero(Frame::kRolling),
                                           Vector3d::Zero(), p, surf, sched, 2.0);
  EXPECT_DOUBLE_EQ(f_n, 2.0);
}

TEST(AttitudeRateLoop, PureArmFeedforward) {
  AttitudeRateController ctrl;
  AttitudeGains gains;
  gains.rate = p_only({0.6, 0.8, 0.4});
  RigidBodyState state;
  AttitudeSetpoint sp;  // zero attitude, zero rates: no error anywhere
  const Wrench arm{Vector3d::Zero(), Vector3d(0.02, -0.05, 0.01), Frame::kBody};
  const RotorCommand cmd = ctrl.update(sp, state, gains, 0.004, ControlMode::kAerial, arm);
  EXPECT_NEAR(cmd.torque_x, -0.02, 1e-15);
  EXPECT_NEAR(cmd.torque_y, 0.05, 1e-15);
  EXPECT_NEAR(cmd.torque_z, -0.01, 1e-15);
}

TEST(AttitudeRateLoop, RollErrorLeavesOtherAxesQuiet) {
  AttitudeRateController ctrl;
  AttitudeGains gains;
  gains.attitude_kp = Vector3d(10, 10, 6);
  gains.rate = p_only({0.6, 0.8, 0.4});
  RigidBodyState state;
  AttitudeSetpoint sp;
  sp.phi_d = 0.2;
  const RotorCommand cmd =
      ctrl.update(sp, state, gains, 0.004, ControlMode::kAerial, Wrench::zero(Frame::kBody));
  EXPECT_GT(cmd.torque_x, 0.0);
  EXPECT_DOUBLE_EQ(cmd.torque_y, 0.0);
  EXPECT_DOUBLE_EQ(cmd.torque_z, 0.0);
}

TEST(AttitudeRateLoop, StepPitchMatchesHandComputedCascade) {
  AttitudeRateController ctrl;
  AttitudeGains gains;
  gains.attitude_kp = Vector3d(10, 10, 6);
  PidGains rate;
  rate.kp = Vector3d(0.6, 0.8, 0.4);
  rate.ki = Vector3d(0.05, 0.05, 0.05);
  rate.integral_limit = 0.5;
  gains.rate = rate;
  RigidBodyState state;
  state.body_rate = Vector3d(0.0, 0.1, 0.0);
  AttitudeSetpoint sp;
  sp.theta_d = 0.15;
  const double dt = 0.004;
  const RotorCommand cmd =
      ctrl.update(sp, state, gains, dt, ControlMode::kAerial, Wrench::zero(Frame::kBody));
  const double rate_sp = 10.0 * 0.15;
  const double rate_err = rate_sp - 0.1;
  const double expected = 0.8 * rate_err + 0.05 * rate_err * dt;
  EXPECT_NEAR(cmd.torque_y, expected, 1e-12);
}

TEST(AttitudeRateLoop, Deterministic) {
  // Identical input sequences must produce bit-identical outputs.
  const auto run = [] {
    AttitudeRateController ctrl;
    AttitudeGains gains;
    gains.rate = p_only({0.6, 0.8, 0.4});
    gains.rate.ki = Vector3d(0.05, 0.05, 0.05);
    RigidBodyState state;
    std::vector<double> out;
    for (int k = 0; k < 50; ++k) {
      state.attitude = Vector3d(0.01 * k, -0.005 * k, 0.002 * k);
      state.body_rate = Vector3d(0.1, -0.05, 0.02);
      AttitudeSetpoint sp;
      sp.thrust = 20.0;
      const RotorCommand cmd =
          ctrl.update(sp, state, gains, 0.004, ControlMode::kAerial, Wrench::zero(Frame::kBody));
      out.push_back(cmd.torque_x);
      out.push_back(cmd.torque_y);
      out.push_back(cmd.torque_z);
    }
    return out;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

// In terrestrial mode the yaw-rate command routes through the tilt
// mixing: on a vertical wall it lands mostly on the body roll axis.
TEST(AttitudeRateLoop, TerrestrialMixingRoutesYawOnWall) {
  AttitudeRateController ctrl;
  AttitudeGains gains;
  gains.rate = p_only({0.5, 0.5, 0.5});
  RigidBodyState state;
  AttitudeSetpoint sp;
  AttitudeRateController::TerrestrialContext ctx;
  ctx.beta = kPi / 2;  // thrust axis parallel to the wall
  ctx.delta = kPi / 2;
  ctx.yaw_rate_cmd = 1.0;
  const RotorCommand cmd = ctrl.update(sp, state, gains, 0.004, ControlMode::kTerrestrial,
                                       Wrench::zero(Frame::kBody), &ctx);
  EXPECT_NEAR(cmd.torque_x, -0.5, 1e-12);
  EXPECT_NEAR(std::abs(cmd.torque_z), 0.0, 1e-12);
}
