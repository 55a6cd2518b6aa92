#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hatm/control.hpp"
#include "hatm/errors.hpp"
#include "hatm/math_utils.hpp"

namespace hatm::sim {

/// Distance/speed/acceleration along a trapezoidal speed profile that
/// covers `length` metres, honouring the configured speed and
/// acceleration limits and stopping at the end.
struct TrapezoidProfile {
  double length = 0.0;
  double v_max = 0.6;
  double a_max = 0.2;

  struct Sample {
    double s = 0.0;
    double v = 0.0;
    double a = 0.0;
  };

  double ramp_time() const {
    const double v = peak_speed();
    return v / a_max;
  }

  double peak_speed() const {
    // Triangular profile when the segment is too short to reach v_max.
    return std::min(v_max, std::sqrt(std::max(length * a_max, 0.0)));
  }

  double duration() const {
    const double v = peak_speed();
    if (v <= 0.0) return 0.0;
    const double t_ramp = v / a_max;
    const double cruise = std::max(length - v * t_ramp, 0.0) / v;
    return 2.0 * t_ramp + cruise;
  }

  Sample at(double t) const {
    Sample out;
    const double v = peak_speed();
    if (v <= 0.0 || t <= 0.0) return out;
    const double t_ramp = v / a_max;
    const double cruise = std::max(length - v * t_ramp, 0.0) / v;
    const double total = 2.0 * t_ramp + cruise;
    if (t >= total) {
      out.s = length;
      return out;
    }
    if (t < t_ramp) {
      out.a = a_max;
      out.v = a_max * t;
      out.s = 0.5 * a_max * t * t;
    } else if (t < t_ramp + cruise) {
      out.v = v;
      out.s = 0.5 * v * t_ramp + v * (t - t_ramp);
    } else {
      const double td = t - t_ramp - cruise;
      out.a = -a_max;
      out.v = v - a_max * td;
      out.s = length - 0.5 * a_max * (t_ramp - td) * (t_ramp - td);
    }
    return out;
  }
};

enum class YawMode { kFixed, kTangent };

/// Piecewise-analytic reference trajectories used by the scenarios:
/// a hover point, a straight line with a trapezoidal speed profile, a
/// circle in an arbitrary plane with a ramped angular speed, or a
/// constant-speed polyline.
class ReferenceTrajectory {
 public:
  static ReferenceTrajectory hover(const Eigen::Vector3d& position, double yaw) {
    ReferenceTrajectory t;
    t.kind_ = Kind::kHover;
    t.start_ = position;
    t.yaw_ = yaw;
    return t;
  }

  static ReferenceTrajectory line(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                                  double v_max, double a_max, double yaw) {
    ReferenceTrajectory t;
    t.kind_ = Kind::kLine;
    t.start_ = from;
    t.direction_ = (to - from);
    const double len = t.direction_.norm();
    t.direction_ = len > 0.0 ? Eigen::Vector3d(t.direction_ / len) : Eigen::Vector3d::UnitX();
    t.profile_ = TrapezoidProfile{len, v_max, a_max};
    t.yaw_ = yaw;
    return t;
  }

  /// Circle of `radius` about `center` in the plane with unit `normal`,
  /// traversed at `speed` after an acceleration-limited ramp.
  static ReferenceTrajectory circle(const Eigen::Vector3d& center, const Eigen::Vector3d& normal,
                                    double radius, double speed, double a_max, double yaw,
                                    YawMode yaw_mode = YawMode::kFixed, double phase = 0.0) {
    ReferenceTrajectory t;
    t.kind_ = Kind::kCircle;
    t.start_ = center;
    t.normal_ = normal.normalized();
    t.radius_ = radius;
    t.speed_ = speed;
    t.accel_ = a_max;
    t.yaw_ = yaw;
    t.yaw_mode_ = yaw_mode;
    t.phase_ = phase;
    // In-plane basis: e1 toward the most vertical direction available.
    const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d e1 = up - up.dot(t.normal_) * t.normal_;
    if (e1.norm() < 1e-9) e1 = Eigen::Vector3d::UnitX() - t.normal_.x() * t.normal_;
    t.e1_ = e1.normalized();
    t.e2_ = t.normal_.cross(t.e1_);
    return t;
  }

  static ReferenceTrajectory polyline(std::vector<Eigen::Vector3d> points, double v_max,
                                      double a_max, double yaw) {
    if (points.size() < 2) {
      throw Error(ErrorCode::kBadScenario, "polyline needs at least two points");
    }
    ReferenceTrajectory t;
    t.kind_ = Kind::kPolyline;
    t.points_ = std::move(points);
    t.yaw_ = yaw;
    t.segment_profiles_.reserve(t.points_.size() - 1);
    for (std::size_t i = 0; i + 1 < t.points_.size(); ++i) {
      t.segment_profiles_.push_back(
          TrapezoidProfile{(t.points_[i + 1] - t.points_[i]).norm(), v_max, a_max});
    }
    return t;
  }

  ReferenceState at(double time) const {
    ReferenceState ref;
    ref.timestamp = time;
    ref.yaw = yaw_;
    switch (kind_) {
      case Kind::kHover:
        ref.position = start_;
        break;
      case Kind::kLine: {
        const auto s = profile_.at(time);
        ref.position = start_ + s.s * direction_;
        ref.velocity = s.v * direction_;
        ref.acceleration = s.a * direction_;
        break;
      }
      case Kind::kCircle: {
        // Angular speed ramps at a_max/r up to speed/r, then holds.
        const double w_max = speed_ / radius_;
        const double alpha = accel_ / radius_;
        const double t_ramp = w_max / alpha;
        double ang, w, wd;
        if (time < t_ramp) {
          wd = alpha;
          w = alpha * time;
          ang = 0.5 * alpha * time * time;
        } else {
          wd = 0.0;
          w = w_max;
          ang = 0.5 * alpha * t_ramp * t_ramp + w_max * (time - t_ramp);
        }
        ang += phase_;
        const Eigen::Vector3d radial = std::cos(ang) * e1_ + std::sin(ang) * e2_;
        const Eigen::Vector3d tangent = -std::sin(ang) * e1_ + std::cos(ang) * e2_;
        ref.position = start_ + radius_ * radial;
        ref.velocity = radius_ * w * tangent;
        ref.acceleration = radius_ * (wd * tangent - w * w * radial);
        if (yaw_mode_ == YawMode::kTangent) {
          ref.yaw = std::atan2(ref.velocity.y(), ref.velocity.x());
        }
        break;
      }
      case Kind::kPolyline: {
        double t_local = time;
        for (std::size_t i = 0; i < segment_profiles_.size(); ++i) {
          const double seg_duration = segment_profiles_[i].duration();
          if (t_local <= seg_duration || i + 1 == segment_profiles_.size()) {
            const auto s = segment_profiles_[i].at(std::min(t_local, seg_duration));
            const Eigen::Vector3d dir = (points_[i + 1] - points_[i]).normalized();
            ref.position = points_[i] + s.s * dir;
            ref.velocity = s.v * dir;
            ref.acceleration = s.a * dir;
            return ref;
          }
          t_local -= seg_duration;
        }
        break;
      }
    }
    return ref;
  }

 private:
  enum class Kind { kHover, kLine, kCircle, kPolyline };

  Kind kind_ = Kind::kHover;
  Eigen::Vector3d start_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction_ = Eigen::Vector3d::UnitX();
  Eigen::Vector3d normal_ = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d e1_ = Eigen::Vector3d::UnitX();
  Eigen::Vector3d e2_ = Eigen::Vector3d::UnitY();
  TrapezoidProfile profile_;
  std::vector<Eigen::Vector3d> points_;
  std::vector<TrapezoidProfile> segment_profiles_;
  double radius_ = 1.0;
  double speed_ = 0.1;
  double accel_ = 0.2;
  double yaw_ = 0.0;
  double phase_ = 0.0;
  YawMode yaw_mode_ = YawMode::kFixed;
};

}  // namespace hatm::sim
