#pragma once

#include <Eigen/Dense>

#include "hatm/errors.hpp"

namespace hatm {

/// Coordinate frame a vector quantity is expressed in. S0..S5 are the
/// arm joint frames, S0 being the arm base mounted on the vehicle.
enum class Frame { kWorld, kBody, kRolling, kS0, kS1, kS2, kS3, kS4, kS5 };

inline const char* frame_name(Frame f) {
  switch (f) {
    case Frame::kWorld: return "world";
    case Frame::kBody: return "body";
    case Frame::kRolling: return "rolling";
    case Frame::kS0: return "S0";
    case Frame::kS1: return "S1";
    case Frame::kS2: return "S2";
    case Frame::kS3: return "S3";
    case Frame::kS4: return "S4";
    case Frame::kS5: return "S5";
  }
  return "?";
}

/// Paired force and torque with an explicit frame tag. Adding wrenches
/// from different frames is a hard error rather than a silent bug.
struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  Frame frame = Frame::kWorld;

  static Wrench zero(Frame f) { return Wrench{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), f}; }

  Wrench operator+(const Wrench& other) const {
    require_frame(other.frame);
    return Wrench{force + other.force, torque + other.torque, frame};
  }

  Wrench operator-() const { return Wrench{-force, -torque, frame}; }

  /// Re-express in another frame: rotate both vectors by `rotation`
  /// (this frame -> target) and move the torque reference point by
  /// `origin_in_target` (position of this frame's origin in the target).
  Wrench transported(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& origin_in_target,
                     Frame target) const {
    const Eigen::Vector3d f = rotation * force;
    return Wrench{f, rotation * torque + origin_in_target.cross(f), target};
  }

  void require_frame(Frame expected) const {
    if (frame != expected) {
      throw Error(ErrorCode::kFrameMismatch, std::string("wrench is in frame ") + frame_name(frame) +
                                                 ", expected " + frame_name(expected));
    }
  }
};

}  // namespace hatm
