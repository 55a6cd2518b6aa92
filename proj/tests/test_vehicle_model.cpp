#include "hatm/vehicle_model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace hatm;
using Eigen::Matrix3d;
using Eigen::Vector3d;

TEST(ContactAttitude, FlatGroundDegeneratesToHeading) {
  const auto a = contact_attitude(0.0, 0.7);
  EXPECT_DOUBLE_EQ(a.phi, 0.0);
  EXPECT_DOUBLE_EQ(a.delta_psi, 0.7);
  EXPECT_DOUBLE_EQ(a.delta, 0.0);
}

TEST(ContactAttitude, VerticalWallDegeneratesToRoll) {
  const auto a = contact_attitude(kPi / 2, kPi / 6);
  EXPECT_NEAR(a.phi, -kPi / 6, 1e-15);
  EXPECT_NEAR(a.delta_psi, 0.0, 1e-15);
}

TEST(ContactAttitude, StraightUphillSlope) {
  const auto a = contact_attitude(kPi / 6, 0.0);
  EXPECT_DOUBLE_EQ(a.phi, 0.0);
  EXPECT_DOUBLE_EQ(a.delta_psi, 0.0);
  EXPECT_NEAR(a.delta, kPi / 6, 1e-15);
}

TEST(ContactAttitude, VerticalWallStraightUpIsWellDefined) {
  const auto a = contact_attitude(kPi / 2, 0.0);
  EXPECT_DOUBLE_EQ(a.phi, 0.0);
  EXPECT_NEAR(a.delta, kPi / 2, 1e-15);
}

// Geometric consistency: build the body attitude from the constraint
// roll/yaw at zero pitch, spin it by an arbitrary angle about the wheel
// axis, and check both wheel contact points stay on the surface plane.
TEST(ContactAttitude, WheelContactPointsStayOnPlane) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ug(0.0, kPi / 2);
  std::uniform_real_distribution<double> ua(-1.4, 1.4);
  std::uniform_real_distribution<double> ub(-1.0, 1.0);
  const double l = 0.17, r_wh = 0.17;
  for (int i = 0; i < 1000; ++i) {
    const double gamma = ug(rng), alpha = ua(rng), spin = ub(rng);
    const auto ang = contact_attitude(gamma, alpha);
    const Matrix3d r_bw =
        euler_zyx_to_matrix(ang.phi, 0.0, ang.delta_psi) * rot_y(spin);
    SurfaceModel surf;
    surf.gamma = gamma;
    const Vector3d n = surf.normal();
    const Vector3d y_b = r_bw.col(1);
    // Wheel axis must lie in the plane for full contact.
    EXPECT_LT(std::abs(y_b.dot(n)), 1e-9);
    const Vector3d com = r_wh * n;  // centre sitting one radius above the plane
    const Vector3d left = com + l * y_b - r_wh * n;
    const Vector3d right = com - l * y_b - r_wh * n;
    EXPECT_LT(std::abs(left.dot(n)), 1e-9);
    EXPECT_LT(std::abs(right.dot(n)), 1e-9);
  }
}

TEST(RollingRotations, FlatGroundAlignedHeading) {
  // With yaw equal to the contact-consistent value, flat ground leaves a
  // pure yaw rotation between world and rolling frames.
  const auto a = contact_attitude(0.0, 0.4);
  const auto r = rolling_rotations(0.0, 0.4, a.delta_psi, a.delta, 0.0);
  EXPECT_LT((r.world_to_rolling - rot_z(-a.delta_psi)).norm(), 1e-14);
}

TEST(RollingRotations, ZeroTiltIdentity) {
  const auto r = rolling_rotations(0.3, 0.2, contact_attitude(0.3, 0.2).delta_psi,
                                   contact_attitude(0.3, 0.2).delta,
                                   -contact_attitude(0.3, 0.2).delta);
  EXPECT_LT((r.body_to_rolling - Matrix3d::Identity()).norm(), 1e-14);
}

TEST(RollingRotations, OrthonormalWithUnitDeterminant) {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> ug(0.0, kPi / 2);
  for (int i = 0; i < 1000; ++i) {
    const auto r = rolling_rotations(ug(rng), u(rng), u(rng), u(rng), u(rng));
    EXPECT_LT((r.world_to_rolling * r.world_to_rolling.transpose() - Matrix3d::Identity()).norm(),
              1e-12);
    EXPECT_NEAR(r.world_to_rolling.determinant(), 1.0, 1e-12);
    EXPECT_LT((r.body_to_rolling * r.body_to_rolling.transpose() - Matrix3d::Identity()).norm(),
              1e-12);
  }
}

TEST(RotorWrench, AlignedFrames) {
  RotorCommand cmd;
  cmd.thrust = 10.0;
  cmd.torque_x = 0.1;
  cmd.torque_y = 0.2;
  cmd.torque_z = 0.05;
  const auto [f, m] = rotor_wrench_rolling(cmd, 0.0);
  EXPECT_LT((f - Vector3d(0, 0, 10)).norm(), 1e-15);
  EXPECT_LT((m - Vector3d(0.1, 0.2, 0.05)).norm(), 1e-15);
}

TEST(RotorWrench, QuarterTurn) {
  RotorCommand cmd;
  cmd.thrust = 10.0;
  cmd.torque_x = 0.1;
  cmd.torque_y = 0.2;
  cmd.torque_z = 0.05;
  const auto [f, m] = rotor_wrench_rolling(cmd, kPi / 2);
  EXPECT_LT((f - Vector3d(10, 0, 0)).norm(), 1e-14);
  EXPECT_LT((m - Vector3d(0.05, 0.2, -0.1)).norm(), 1e-14);
}

TEST(RotorWrench, MatchesRotationMatrixOracle) {
  RotorCommand cmd;
  cmd.thrust = 10.0;
  cmd.torque_x = 0.1;
  cmd.torque_y = 0.2;
  cmd.torque_z = 0.05;
  const double tilt = 0.3;
  const auto [f, m] = rotor_wrench_rolling(cmd, tilt);
  EXPECT_LT((f - rot_y(tilt) * Vector3d(0, 0, cmd.thrust)).norm(), 1e-14);
  EXPECT_LT((m - rot_y(tilt) * cmd.torque()).norm(), 1e-14);
}

TEST(AerialDerivatives, HoverIsEquilibrium) {
  const VehicleParams p = VehicleParams::standard();
  RigidBodyState s;
  RotorCommand cmd;
  cmd.thrust = p.mass * p.gravity;
  const auto d = aerial_derivatives(s, cmd, Wrench::zero(Frame::kBody), p);
  EXPECT_LT(d.velocity_dot.norm(), 1e-12);
  EXPECT_LT(d.body_rate_dot.norm(), 1e-12);
}

TEST(AerialDerivatives, FreeFall) {
  const VehicleParams p = VehicleParams::standard();
  RigidBodyState s;
  s.attitude = Vector3d(0.2, -0.1, 0.9);
  const auto d = aerial_derivatives(s, RotorCommand{}, Wrench::zero(Frame::kBody), p);
  EXPECT_LT((d.velocity_dot - Vector3d(0, 0, -p.gravity)).norm(), 1e-12);
}

// Duplicate-implementation check of the translational and rotational
// equations on random inputs.
TEST(AerialDerivatives, MatchesIndependentEvaluation) {
  const VehicleParams p = VehicleParams::standard();
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    RigidBodyState s;
    s.position = Vector3d(u(rng), u(rng), u(rng));
    s.velocity = Vector3d(u(rng), u(rng), u(rng));
    s.attitude = Vector3d(u(rng) * 0.8, u(rng) * 0.8, u(rng) * 3);
    s.body_rate = Vector3d(u(rng), u(rng), u(rng));
    RotorCommand cmd;
    cmd.thrust = 20.0 + 5.0 * u(rng);
    cmd.torque_x = 0.3 * u(rng);
    cmd.torque_y = 0.3 * u(rng);
    cmd.torque_z = 0.3 * u(rng);
    const Wrench arm{Vector3d(u(rng), u(rng), u(rng)), Vector3d(u(rng), u(rng), u(rng)) * 0.1,
                     Frame::kBody};
    const auto d = aerial_derivatives(s, cmd, arm, p);

    const Matrix3d r = euler_zyx_to_matrix(s.attitude.x(), s.attitude.y(), s.attitude.z());
    const Vector3d residual =
        p.mass * d.velocity_dot + p.mass * Vector3d(0, 0, p.gravity) -
        r * (Vector3d(0, 0, cmd.thrust) + arm.force);
    EXPECT_LT(residual.norm(), 1e-10);
    const Vector3d rot_residual = p.inertia * d.body_rate_dot +
                                  s.body_rate.cross(p.inertia * s.body_rate) -
                                  (cmd.torque() + arm.torque);
    EXPECT_LT(rot_residual.norm(), 1e-10);
  }
}

TEST(AerialDerivatives, PitchSingularityGuard) {
  const VehicleParams p = VehicleParams::standard();
  RigidBodyState s;
  s.attitude.y() = kPi / 2;
  EXPECT_THROW(aerial_derivatives(s, RotorCommand{}, Wrench::zero(Frame::kBody), p), Error);
}

TEST(FrictionForces, EqualWheelLoadsNoYawResistance) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  TerrestrialState terr;
  terr.f_left = terr.f_right = 10.0;
  terr.v_rx = 0.5;
  terr.alpha_rate = 0.3;
  const auto f = friction_forces(terr, p, surf, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(f.tau_roll.z(), 0.0);
}

TEST(FrictionForces, MasslessWheels) {
  VehicleParams p = VehicleParams::standard();
  p.wheel_inertia = 0.0;
  SurfaceModel surf;
  surf.in_contact = true;
  TerrestrialState terr;
  terr.v_rx = 0.5;
  const auto f = friction_forces(terr, p, surf, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(f.f_wheel.norm(), 0.0);
  EXPECT_DOUBLE_EQ(f.tau_wheel.norm(), 0.0);
}

TEST(FrictionForces, FlatGroundMagnitude) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  surf.mu_r = 0.02;
  TerrestrialState terr;
  terr.f_left = terr.f_right = 23.5 / 2;
  terr.v_rx = 0.4;  // moving forward
  const auto f = friction_forces(terr, p, surf, 0.0, 0.0);
  EXPECT_NEAR(f.f_roll.norm(), 0.47, 1e-12);
  EXPECT_GT(f.f_roll.x(), 0.0);  // reported along the motion; subtracted by the balance
}

TEST(FrictionForces, RequiresContact) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = false;
  EXPECT_THROW(friction_forces(TerrestrialState{}, p, surf, 0, 0), Error);
}

namespace {

RigidBodyState dummy_state() { return RigidBodyState{}; }

}  // namespace

TEST(TerrestrialDerivatives, RestOnFlatGround) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  TerrestrialState terr;
  const auto d = terrestrial_derivatives(dummy_state(), terr, RotorCommand{},
                                         Wrench::zero(Frame::kRolling), surf, p);
  EXPECT_NEAR(d.f_n, p.mass * p.gravity, 1e-12);
  EXPECT_NEAR(d.v_rx_dot, 0.0, 1e-12);
  EXPECT_FALSE(d.slip);
  EXPECT_NEAR(d.f_left, d.f_right, 1e-12);
}

TEST(TerrestrialDerivatives, DrivingForceBalancedByRollingFriction) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  TerrestrialState terr;
  terr.v_rx = 0.5;
  // Pick a tilt whose forward thrust component exactly cancels rolling
  // friction at the resulting normal force.
  RotorCommand cmd;
  const double tilt = 0.05;
  terr.beta = tilt;
  // f_n = m g - U1 cos(tilt); need U1 sin(tilt) = mu * f_n.
  const double mg = p.mass * p.gravity;
  cmd.thrust = surf.mu_r * mg / (std::sin(tilt) + surf.mu_r * std::cos(tilt));
  const auto d = terrestrial_derivatives(dummy_state(), terr, cmd, Wrench::zero(Frame::kRolling),
                                         surf, p);
  EXPECT_NEAR(d.v_rx_dot, 0.0, 1e-12);
}

// Independent forward/normal balance on a steep slope, evaluated
// symbolically for a stationary vehicle.
TEST(TerrestrialDerivatives, SteepSlopeMatchesSymbolicSolve) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  surf.gamma = kPi / 3;
  TerrestrialState terr;
  terr.beta = contact_attitude(surf.gamma, 0.0).delta;  // body aligned with the slope
  RotorCommand cmd;
  cmd.thrust = 12.0;
  const auto d = terrestrial_derivatives(dummy_state(), terr, cmd, Wrench::zero(Frame::kRolling),
                                         surf, p);
  const double mg = p.mass * p.gravity;
  const double f_n_expected = mg * std::cos(surf.gamma) - cmd.thrust * std::cos(terr.beta);
  EXPECT_NEAR(d.f_n, f_n_expected, 1e-12);
  const double wheel_term = 2 * p.wheel_inertia / (p.wheel_radius * p.wheel_radius);
  const double v_dot_expected =
      (cmd.thrust * std::sin(terr.beta) - mg * std::sin(surf.gamma)) / (p.mass + wheel_term);
  EXPECT_NEAR(d.v_rx_dot, v_dot_expected, 1e-12);
}

TEST(TerrestrialDerivatives, ContactLostWhenThrustExceedsWeight) {
  const VehicleParams p = VehicleParams::standard();
  SurfaceModel surf;
  surf.in_contact = true;
  TerrestrialState terr;
  RotorCommand cmd;
  cmd.thrust = 2.0 * p.mass * p.gravity;
  EXPECT_THROW(terrestrial_derivatives(dummy_state(), terr, cmd, Wrench::zero(Frame::kRolling),
                                       surf, p),
               Error);
}

TEST(TerrestrialDerivatives, MonotoneInRollingFriction) {
  const VehicleParams p = VehicleParams::standard();
  TerrestrialState terr;
  terr.v_rx = 0.5;
  terr.beta = 0.1;
  RotorCommand cmd;
  cmd.thrust = 5.0;
  double prev = 1e9;
  for (double mu : {0.0, 0.01, 0.02, 0.05, 0.1}) {
    SurfaceModel surf;
    surf.in_contact = true;
    surf.mu_r = mu;
    const auto d = terrestrial_derivatives(dummy_state(), terr, cmd, Wrench::zero(Frame::kRolling),
                                           surf, p);
    EXPECT_LT(d.v_rx_dot, prev);
    prev = d.v_rx_dot;
  }
}

TEST(TerrestrialDerivatives, NormalForceContinuousInGamma) {
  const VehicleParams p = VehicleParams::standard();
  RotorCommand cmd;
  cmd.thrust = 6.0;
  double prev = 0.0;
  bool first = true;
  const int steps = 900;
  for (int i = 0; i <= steps; ++i) {
    const double gamma = (kPi / 2) * i / steps;
    SurfaceModel surf;
    surf.in_contact = true;
    surf.gamma = gamma;
    TerrestrialState terr;
    terr.beta = contact_attitude(gamma, 0.0).delta;
    const auto d = terrestrial_derivatives(dummy_state(), terr, cmd, Wrench::zero(Frame::kRolling),
                                           surf, p);
    if (!first) {
      // Lipschitz bound of m g cos(gamma) - U1 cos(delta(gamma)) in gamma
      // is m g + U1; allow slack for the discrete step.
      const double dgamma = (kPi / 2) / steps;
      EXPECT_LT(std::abs(d.f_n - prev), (p.mass * p.gravity + cmd.thrust) * dgamma * 1.5);
    }
    prev = d.f_n;
    first = false;
  }
}

TEST(ComGravityTorque, ZeroOffsetZeroTorque) {
  VehicleParams p = VehicleParams::standard();
  EXPECT_DOUBLE_EQ(com_gravity_torque(p, Matrix3d::Identity(), Vector3d(0, 0, 23.5)).norm(), 0.0);
}

TEST(ComGravityTorque, VerticalOffsetOnFlatGround) {
  VehicleParams p = VehicleParams::standard();
  p.com_offset = Vector3d(0, 0, 0.05);
  // Level attitude on flat ground: offset parallel to the gravity
  // expression in the rolling frame.
  const Vector3d tau = com_gravity_torque(p, Matrix3d::Identity(),
                                          Vector3d(0, 0, p.mass * p.gravity));
  EXPECT_LT(tau.norm(), 1e-15);
}

TEST(ComGravityTorque, MatchesHandComputedCrossProduct) {
  VehicleParams p = VehicleParams::standard();
  p.com_offset = Vector3d(0.01, 0.0, 0.02);
  const double gamma = kPi / 4;
  const Vector3d f_g = p.mass * (rot_y(gamma) * Vector3d(0, 0, p.gravity));
  const Matrix3d r_br = rot_y(0.3);
  const Vector3d tau = com_gravity_torque(p, r_br, f_g);
  const Vector3d offset_r = r_br * p.com_offset;
  EXPECT_LT((tau - offset_r.cross(f_g)).norm(), 1e-15);
}
