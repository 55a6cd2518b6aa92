#pragma once

#include <json.hpp>

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hatm/arm_dynamics.hpp"
#include "hatm/control.hpp"
#include "hatm/estimation.hpp"
#include "hatm/math_utils.hpp"
#include "hatm/sim/trajectory.hpp"
#include "hatm/vehicle_model.hpp"

namespace hatm::sim {

using nlohmann::json;

enum class ModePolicy { kLocked, kAuto, kScripted };

struct ModeScheduleEntry {
  double time = 0.0;
  ControlMode mode = ControlMode::kAerial;
};

struct NoiseConfig {
  bool enabled = true;
  std::uint64_t seed = 1;
  double pos_sigma = 0.001;        // m
  double vel_sigma = 0.005;        // m/s
  double att_sigma = deg_to_rad(0.2);
  double rate_sigma = 0.002;       // rad/s
};

struct ControlConfig {
  PidGains position;
  PidGains velocity;
  Eigen::Vector3d attitude_kp = Eigen::Vector3d(10.0, 10.0, 6.0);
  PidGains rate;
  YawGainSchedule yaw_gain_schedule;
  ThrustSchedule thrust_schedule;
  LosYawGuidance::Config los;
  double lookahead = 0.0;          // s, reference lead for the LOS target
  double tilt_limit = deg_to_rad(35.0);
  double normal_force_min = 2.0;   // N
  bool compensate_arm = true;
  bool use_estimated_gamma = false;

  ControlConfig() {
    position.kp = Eigen::Vector3d(3.0, 3.0, 4.0);
    position.ki = Eigen::Vector3d::Zero();
    position.kd = Eigen::Vector3d::Zero();
    position.integral_limit = 1.0;
    velocity.kp = Eigen::Vector3d(4.0, 4.0, 5.0);
    velocity.ki = Eigen::Vector3d(0.5, 0.5, 0.5);
    velocity.kd = Eigen::Vector3d::Zero();
    velocity.integral_limit = 2.0;
    rate.kp = Eigen::Vector3d(0.6, 0.8, 0.4);
    rate.ki = Eigen::Vector3d(0.05, 0.05, 0.05);
    rate.kd = Eigen::Vector3d::Zero();
    rate.integral_limit = 0.5;
  }
};

struct EstimatorConfig {
  bool enabled = true;
  int horizon = 20;
  AugVector q_diag = (AugVector() << 1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2).finished();
  MeasVector r_diag =
      (MeasVector() << 1e-4, 1e-4, 1e-4, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3).finished();
  double force_floor = 0.5;
  int max_iterations = 25;
  double gradient_tolerance = 1e-9;
};

struct ReferenceConfig {
  std::string type = "hover";  // hover | line | circle | polyline
  Eigen::Vector3d position = Eigen::Vector3d(0.0, 0.0, 1.0);
  Eigen::Vector3d from = Eigen::Vector3d::Zero();
  Eigen::Vector3d to = Eigen::Vector3d::UnitX();
  Eigen::Vector3d center = Eigen::Vector3d(0.0, 0.0, 1.0);
  std::optional<Eigen::Vector3d> normal;  // default: the surface normal
  double radius = 0.15;
  double speed = 0.1;
  double v_max = 0.6;
  double a_max = 0.2;
  double yaw = 0.0;
  double phase = 0.0;
  YawMode yaw_mode = YawMode::kFixed;
  std::vector<Eigen::Vector3d> points;
};

struct ArmTrajectoryConfig {
  std::array<double, kArmJointCount> base{};  // rad
  std::vector<int> swing_joints;              // 1-based indices
  double amplitude = 0.0;                     // rad
  double frequency = 0.5;                     // Hz
  double start = 0.0;                         // s
};

struct InitialConfig {
  ControlMode mode = ControlMode::kAerial;
  Eigen::Vector3d position = Eigen::Vector3d(0.0, 0.0, 1.0);
  double yaw = 0.0;
  double alpha = 0.0;  // heading on the surface when starting in contact
  double v_rx = 0.0;
};

struct Scenario {
  double duration = 10.0;
  double settle_time = 2.0;
  int integrator_rate = 1000;
  int control_rate = 250;
  int estimator_rate = 100;
  double log_rate = 250.0;

  VehicleParams vehicle = VehicleParams::standard();
  SurfaceModel surface;
  ArmModel arm = ArmModel::standard();
  bool arm_enabled = true;

  InitialConfig initial;
  ModePolicy mode_policy = ModePolicy::kLocked;
  double mode_debounce = 0.1;
  std::vector<ModeScheduleEntry> mode_schedule;

  ReferenceConfig reference;
  ArmTrajectoryConfig arm_trajectory;
  NoiseConfig noise;
  ControlConfig control;
  EstimatorConfig estimator;

  void validate() const {
    if (!(duration >= 0.0)) throw Error(ErrorCode::kBadScenario, "duration must be >= 0");
    if (integrator_rate <= 0 || control_rate <= 0 || estimator_rate <= 0) {
      throw Error(ErrorCode::kBadScenario, "rates must be positive");
    }
    if (integrator_rate % control_rate != 0 || integrator_rate % estimator_rate != 0) {
      throw Error(ErrorCode::kBadScenario, "control/estimator rates must divide the integrator rate");
    }
    if (surface.gamma < 0.0 || surface.gamma > kPi / 2 + 1e-12) {
      throw Error(ErrorCode::kBadScenario, "surface inclination must lie in [0, 90] degrees");
    }
    if (vehicle.mass <= 0.0 || vehicle.wheel_radius <= 0.0) {
      throw Error(ErrorCode::kBadScenario, "vehicle mass and wheel radius must be positive");
    }
  }

  ReferenceTrajectory build_reference() const {
    const Eigen::Vector3d n = reference.normal.value_or(surface.normal());
    if (reference.type == "hover") return ReferenceTrajectory::hover(reference.position, reference.yaw);
    if (reference.type == "line") {
      return ReferenceTrajectory::line(reference.from, reference.to, reference.v_max,
                                       reference.a_max, reference.yaw);
    }
    if (reference.type == "circle") {
      return ReferenceTrajectory::circle(reference.center, n, reference.radius, reference.speed,
                                         reference.a_max, reference.yaw, reference.yaw_mode,
                                         reference.phase);
    }
    if (reference.type == "polyline") {
      return ReferenceTrajectory::polyline(reference.points, reference.v_max, reference.a_max,
                                           reference.yaw);
    }
    throw Error(ErrorCode::kBadScenario, "unknown reference type '" + reference.type + "'");
  }
};

namespace detail {

inline Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kBadScenario, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline void load_pid(const json& j, PidGains& g) {
  if (j.contains("kp")) g.kp = vec3(j["kp"]);
  if (j.contains("ki")) g.ki = vec3(j["ki"]);
  if (j.contains("kd")) g.kd = vec3(j["kd"]);
  if (j.contains("integral_limit")) g.integral_limit = j["integral_limit"].get<double>();
}

inline json pid_json(const PidGains& g) {
  return json{{"kp", vec3_json(g.kp)},
              {"ki", vec3_json(g.ki)},
              {"kd", vec3_json(g.kd)},
              {"integral_limit", g.integral_limit}};
}

}  // namespace detail

inline Scenario scenario_from_json(const json& j);
inline json scenario_to_json(const Scenario& s);

inline Scenario scenario_from_json(const json& j) {
  Scenario s;
  using detail::vec3;
  if (j.contains("duration")) s.duration = j["duration"].get<double>();
  if (j.contains("settle_time")) s.settle_time = j["settle_time"].get<double>();
  if (j.contains("rates")) {
    const json& r = j["rates"];
    if (r.contains("integrator")) s.integrator_rate = r["integrator"].get<int>();
    if (r.contains("control")) s.control_rate = r["control"].get<int>();
    if (r.contains("estimator")) s.estimator_rate = r["estimator"].get<int>();
  }
  if (j.contains("log_rate")) s.log_rate = j["log_rate"].get<double>();

  if (j.contains("vehicle")) {
    const json& v = j["vehicle"];
    if (v.contains("mass")) s.vehicle.mass = v["mass"].get<double>();
    if (v.contains("inertia_diag")) s.vehicle.inertia = vec3(v["inertia_diag"]).asDiagonal();
    if (v.contains("half_track")) s.vehicle.half_track = v["half_track"].get<double>();
    if (v.contains("wheel_radius")) s.vehicle.wheel_radius = v["wheel_radius"].get<double>();
    if (v.contains("wheel_inertia")) s.vehicle.wheel_inertia = v["wheel_inertia"].get<double>();
    if (v.contains("com_offset")) s.vehicle.com_offset = vec3(v["com_offset"]);
    if (v.contains("gravity")) s.vehicle.gravity = v["gravity"].get<double>();
    if (v.contains("max_thrust")) s.vehicle.max_thrust = v["max_thrust"].get<double>();
    if (v.contains("max_torque")) s.vehicle.max_torque = v["max_torque"].get<double>();
  }
  if (j.contains("surface")) {
    const json& f = j["surface"];
    if (f.contains("gamma_deg")) s.surface.gamma = deg_to_rad(f["gamma_deg"].get<double>());
    if (f.contains("mu_r")) s.surface.mu_r = f["mu_r"].get<double>();
    if (f.contains("mu_smax")) s.surface.mu_smax = f["mu_smax"].get<double>();
  }
  if (j.contains("arm")) {
    const json& a = j["arm"];
    if (a.contains("enabled")) s.arm_enabled = a["enabled"].get<bool>();
    if (a.contains("mount_rpy_deg")) {
      const Eigen::Vector3d rpy = vec3(a["mount_rpy_deg"]);
      s.arm.mount_rotation =
          euler_zyx_to_matrix(deg_to_rad(rpy.x()), deg_to_rad(rpy.y()), deg_to_rad(rpy.z()));
    }
    if (a.contains("joint5_actuated")) s.arm.joint5_actuated = a["joint5_actuated"].get<bool>();
    if (a.contains("dh")) {
      const json& rows = a["dh"];
      if (rows.size() != kArmJointCount) throw Error(ErrorCode::kBadScenario, "arm.dh needs 5 rows");
      for (int i = 0; i < kArmJointCount; ++i) {
        const json& row = rows[i];
        s.arm.dh[i].alpha_prev = deg_to_rad(row.value("alpha_deg", 0.0));
        s.arm.dh[i].a_prev = row.value("a", 0.0);
        s.arm.dh[i].d = row.value("d", 0.0);
      }
    }
    if (a.contains("links")) {
      const json& links = a["links"];
      if (links.size() != kArmJointCount) throw Error(ErrorCode::kBadScenario, "arm.links needs 5 entries");
      for (int i = 0; i < kArmJointCount; ++i) {
        const json& l = links[i];
        if (l.contains("mass")) s.arm.links[i].mass = l["mass"].get<double>();
        if (l.contains("inertia_diag")) s.arm.links[i].inertia_c = vec3(l["inertia_diag"]).asDiagonal();
        if (l.contains("centroid")) s.arm.links[i].centroid = vec3(l["centroid"]);
      }
    }
  }
  if (j.contains("initial")) {
    const json& i = j["initial"];
    if (i.contains("mode")) {
      s.initial.mode = i["mode"].get<std::string>() == "terrestrial" ? ControlMode::kTerrestrial
                                                                     : ControlMode::kAerial;
    }
    if (i.contains("position")) s.initial.position = vec3(i["position"]);
    if (i.contains("yaw_deg")) s.initial.yaw = deg_to_rad(i["yaw_deg"].get<double>());
    if (i.contains("alpha_deg")) s.initial.alpha = deg_to_rad(i["alpha_deg"].get<double>());
    if (i.contains("v_rx")) s.initial.v_rx = i["v_rx"].get<double>();
  }
  if (j.contains("mode_policy")) {
    const json& m = j["mode_policy"];
    const std::string type = m.value("type", "locked");
    if (type == "locked") s.mode_policy = ModePolicy::kLocked;
    else if (type == "auto") s.mode_policy = ModePolicy::kAuto;
    else if (type == "scripted") s.mode_policy = ModePolicy::kScripted;
    else throw Error(ErrorCode::kBadScenario, "unknown mode policy '" + type + "'");
    if (m.contains("debounce")) s.mode_debounce = m["debounce"].get<double>();
    if (m.contains("schedule")) {
      for (const json& e : m["schedule"]) {
        s.mode_schedule.push_back(
            {e["t"].get<double>(), e["mode"].get<std::string>() == "terrestrial"
                                       ? ControlMode::kTerrestrial
                                       : ControlMode::kAerial});
      }
    }
  }
  if (j.contains("reference")) {
    const json& r = j["reference"];
    ReferenceConfig& c = s.reference;
    if (r.contains("type")) c.type = r["type"].get<std::string>();
    if (r.contains("position")) c.position = vec3(r["position"]);
    if (r.contains("from")) c.from = vec3(r["from"]);
    if (r.contains("to")) c.to = vec3(r["to"]);
    if (r.contains("center")) c.center = vec3(r["center"]);
    if (r.contains("normal")) c.normal = vec3(r["normal"]);
    if (r.contains("radius")) c.radius = r["radius"].get<double>();
    if (r.contains("speed")) c.speed = r["speed"].get<double>();
    if (r.contains("v_max")) c.v_max = r["v_max"].get<double>();
    if (r.contains("a_max")) c.a_max = r["a_max"].get<double>();
    if (r.contains("yaw_deg")) c.yaw = deg_to_rad(r["yaw_deg"].get<double>());
    if (r.contains("phase_deg")) c.phase = deg_to_rad(r["phase_deg"].get<double>());
    if (r.contains("yaw_mode")) {
      c.yaw_mode = r["yaw_mode"].get<std::string>() == "tangent" ? YawMode::kTangent : YawMode::kFixed;
    }
    if (r.contains("points")) {
      for (const json& p : r["points"]) c.points.push_back(vec3(p));
    }
  }
  if (j.contains("arm_trajectory")) {
    const json& a = j["arm_trajectory"];
    if (a.contains("base_deg")) {
      const json& b = a["base_deg"];
      if (b.size() != kArmJointCount) throw Error(ErrorCode::kBadScenario, "base_deg needs 5 entries");
      for (int i = 0; i < kArmJointCount; ++i) s.arm_trajectory.base[i] = deg_to_rad(b[i].get<double>());
    }
    if (a.contains("swing_joints")) {
      for (const json& v : a["swing_joints"]) s.arm_trajectory.swing_joints.push_back(v.get<int>());
    }
    if (a.contains("amplitude_deg")) s.arm_trajectory.amplitude = deg_to_rad(a["amplitude_deg"].get<double>());
    if (a.contains("frequency")) s.arm_trajectory.frequency = a["frequency"].get<double>();
    if (a.contains("start")) s.arm_trajectory.start = a["start"].get<double>();
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    if (n.contains("enabled")) s.noise.enabled = n["enabled"].get<bool>();
    if (n.contains("seed")) s.noise.seed = n["seed"].get<std::uint64_t>();
    if (n.contains("pos_sigma")) s.noise.pos_sigma = n["pos_sigma"].get<double>();
    if (n.contains("vel_sigma")) s.noise.vel_sigma = n["vel_sigma"].get<double>();
    if (n.contains("att_sigma_deg")) s.noise.att_sigma = deg_to_rad(n["att_sigma_deg"].get<double>());
    if (n.contains("rate_sigma")) s.noise.rate_sigma = n["rate_sigma"].get<double>();
  }
  if (j.contains("control")) {
    const json& c = j["control"];
    if (c.contains("position")) detail::load_pid(c["position"], s.control.position);
    if (c.contains("velocity")) detail::load_pid(c["velocity"], s.control.velocity);
    if (c.contains("attitude_kp")) s.control.attitude_kp = vec3(c["attitude_kp"]);
    if (c.contains("rate")) detail::load_pid(c["rate"], s.control.rate);
    if (c.contains("yaw_gain_schedule")) {
      const json& y = c["yaw_gain_schedule"];
      if (y.contains("slope_per_deg")) s.control.yaw_gain_schedule.slope_per_deg = y["slope_per_deg"].get<double>();
      if (y.contains("offset")) s.control.yaw_gain_schedule.offset = y["offset"].get<double>();
    }
    if (c.contains("thrust_schedule")) {
      const json& t = c["thrust_schedule"];
      if (t.contains("c2")) s.control.thrust_schedule.c2 = t["c2"].get<double>();
      if (t.contains("c1")) s.control.thrust_schedule.c1 = t["c1"].get<double>();
      if (t.contains("c0")) s.control.thrust_schedule.c0 = t["c0"].get<double>();
    }
    if (c.contains("los")) {
      const json& l = c["los"];
      if (l.contains("deadband")) s.control.los.deadband = l["deadband"].get<double>();
      if (l.contains("lowpass_cutoff")) s.control.los.lowpass_cutoff = l["lowpass_cutoff"].get<double>();
    }
    if (c.contains("lookahead")) s.control.lookahead = c["lookahead"].get<double>();
    if (c.contains("tilt_limit_deg")) s.control.tilt_limit = deg_to_rad(c["tilt_limit_deg"].get<double>());
    if (c.contains("normal_force_min")) s.control.normal_force_min = c["normal_force_min"].get<double>();
    if (c.contains("compensate_arm")) s.control.compensate_arm = c["compensate_arm"].get<bool>();
    if (c.contains("use_estimated_gamma")) s.control.use_estimated_gamma = c["use_estimated_gamma"].get<bool>();
  }
  if (j.contains("estimator")) {
    const json& e = j["estimator"];
    if (e.contains("enabled")) s.estimator.enabled = e["enabled"].get<bool>();
    if (e.contains("horizon")) s.estimator.horizon = e["horizon"].get<int>();
    if (e.contains("q_diag")) {
      const json& q = e["q_diag"];
      if (q.size() != kAugStateDim) throw Error(ErrorCode::kBadScenario, "q_diag needs 9 entries");
      for (int i = 0; i < kAugStateDim; ++i) s.estimator.q_diag[i] = q[i].get<double>();
    }
    if (e.contains("r_diag")) {
      const json& r = e["r_diag"];
      if (r.size() != kMeasurementDim) throw Error(ErrorCode::kBadScenario, "r_diag needs 10 entries");
      for (int i = 0; i < kMeasurementDim; ++i) s.estimator.r_diag[i] = r[i].get<double>();
    }
    if (e.contains("force_floor")) s.estimator.force_floor = e["force_floor"].get<double>();
    if (e.contains("max_iterations")) s.estimator.max_iterations = e["max_iterations"].get<int>();
    if (e.contains("gradient_tolerance")) s.estimator.gradient_tolerance = e["gradient_tolerance"].get<double>();
  }
  s.validate();
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  using detail::vec3_json;
  json j;
  j["duration"] = s.duration;
  j["settle_time"] = s.settle_time;
  j["rates"] = {{"integrator", s.integrator_rate},
                {"control", s.control_rate},
                {"estimator", s.estimator_rate}};
  j["log_rate"] = s.log_rate;
  j["vehicle"] = {{"mass", s.vehicle.mass},
                  {"inertia_diag", vec3_json(s.vehicle.inertia.diagonal())},
                  {"half_track", s.vehicle.half_track},
                  {"wheel_radius", s.vehicle.wheel_radius},
                  {"wheel_inertia", s.vehicle.wheel_inertia},
                  {"com_offset", vec3_json(s.vehicle.com_offset)},
                  {"gravity", s.vehicle.gravity},
                  {"max_thrust", s.vehicle.max_thrust},
                  {"max_torque", s.vehicle.max_torque}};
  j["surface"] = {{"gamma_deg", rad_to_deg(s.surface.gamma)},
                  {"mu_r", s.surface.mu_r},
                  {"mu_smax", s.surface.mu_smax}};
  json dh = json::array();
  json links = json::array();
  for (int i = 0; i < kArmJointCount; ++i) {
    dh.push_back({{"alpha_deg", rad_to_deg(s.arm.dh[i].alpha_prev)},
                  {"a", s.arm.dh[i].a_prev},
                  {"d", s.arm.dh[i].d}});
    links.push_back({{"mass", s.arm.links[i].mass},
                     {"inertia_diag", vec3_json(s.arm.links[i].inertia_c.diagonal())},
                     {"centroid", vec3_json(s.arm.links[i].centroid)}});
  }
  const Eigen::Vector3d mount_rpy = matrix_to_euler_zyx(s.arm.mount_rotation);
  j["arm"] = {{"enabled", s.arm_enabled},
              {"mount_rpy_deg",
               vec3_json({rad_to_deg(mount_rpy.x()), rad_to_deg(mount_rpy.y()), rad_to_deg(mount_rpy.z())})},
              {"joint5_actuated", s.arm.joint5_actuated},
              {"dh", dh},
              {"links", links}};
  j["initial"] = {{"mode", s.initial.mode == ControlMode::kTerrestrial ? "terrestrial" : "aerial"},
                  {"position", vec3_json(s.initial.position)},
                  {"yaw_deg", rad_to_deg(s.initial.yaw)},
                  {"alpha_deg", rad_to_deg(s.initial.alpha)},
                  {"v_rx", s.initial.v_rx}};
  json schedule = json::array();
  for (const auto& e : s.mode_schedule) {
    schedule.push_back(
        {{"t", e.time}, {"mode", e.mode == ControlMode::kTerrestrial ? "terrestrial" : "aerial"}});
  }
  const char* policy = s.mode_policy == ModePolicy::kLocked
                           ? "locked"
                           : (s.mode_policy == ModePolicy::kAuto ? "auto" : "scripted");
  j["mode_policy"] = {{"type", policy}, {"debounce", s.mode_debounce}, {"schedule", schedule}};
  json ref = {{"type", s.reference.type},
              {"position", vec3_json(s.reference.position)},
              {"from", vec3_json(s.reference.from)},
              {"to", vec3_json(s.reference.to)},
              {"center", vec3_json(s.reference.center)},
              {"radius", s.reference.radius},
              {"speed", s.reference.speed},
              {"v_max", s.reference.v_max},
              {"a_max", s.reference.a_max},
              {"yaw_deg", rad_to_deg(s.reference.yaw)},
              {"phase_deg", rad_to_deg(s.reference.phase)},
              {"yaw_mode", s.reference.yaw_mode == YawMode::kTangent ? "tangent" : "fixed"}};
  if (s.reference.normal) ref["normal"] = vec3_json(*s.reference.normal);
  if (!s.reference.points.empty()) {
    json pts = json::array();
    for (const auto& p : s.reference.points) pts.push_back(vec3_json(p));
    ref["points"] = pts;
  }
  j["reference"] = ref;
  json base = json::array();
  for (double b : s.arm_trajectory.base) base.push_back(rad_to_deg(b));
  j["arm_trajectory"] = {{"base_deg", base},
                         {"swing_joints", s.arm_trajectory.swing_joints},
                         {"amplitude_deg", rad_to_deg(s.arm_trajectory.amplitude)},
                         {"frequency", s.arm_trajectory.frequency},
                         {"start", s.arm_trajectory.start}};
  j["noise"] = {{"enabled", s.noise.enabled},
                {"seed", s.noise.seed},
                {"pos_sigma", s.noise.pos_sigma},
                {"vel_sigma", s.noise.vel_sigma},
                {"att_sigma_deg", rad_to_deg(s.noise.att_sigma)},
                {"rate_sigma", s.noise.rate_sigma}};
  j["control"] = {{"position", detail::pid_json(s.control.position)},
                  {"velocity", detail::pid_json(s.control.velocity)},
                  {"attitude_kp", vec3_json(s.control.attitude_kp)},
                  {"rate", detail::pid_json(s.control.rate)},
                  {"yaw_gain_schedule",
                   {{"slope_per_deg", s.control.yaw_gain_schedule.slope_per_deg},
                    {"offset", s.control.yaw_gain_schedule.offset}}},
                  {"thrust_schedule",
                   {{"c2", s.control.thrust_schedule.c2},
                    {"c1", s.control.thrust_schedule.c1},
                    {"c0", s.control.thrust_schedule.c0}}},
                  {"los", {{"deadband", s.control.los.deadband}, {"lowpass_cutoff", s.control.los.lowpass_cutoff}}},
                  {"lookahead", s.control.lookahead},
                  {"tilt_limit_deg", rad_to_deg(s.control.tilt_limit)},
                  {"normal_force_min", s.control.normal_force_min},
                  {"compensate_arm", s.control.compensate_arm},
                  {"use_estimated_gamma", s.control.use_estimated_gamma}};
  json qd = json::array(), rd = json::array();
  for (int i = 0; i < kAugStateDim; ++i) qd.push_back(s.estimator.q_diag[i]);
  for (int i = 0; i < kMeasurementDim; ++i) rd.push_back(s.estimator.r_diag[i]);
  j["estimator"] = {{"enabled", s.estimator.enabled},
                    {"horizon", s.estimator.horizon},
                    {"q_diag", qd},
                    {"r_diag", rd},
                    {"force_floor", s.estimator.force_floor},
                    {"max_iterations", s.estimator.max_iterations},
                    {"gradient_tolerance", s.estimator.gradient_tolerance}};
  return j;
}

/// Apply a `key.path=value` override; the value is parsed as JSON when
/// possible, as a string otherwise.
inline void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::kBadScenario, "override must look like key.path=value: " + spec);
  }
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw Error(ErrorCode::kBadScenario, "empty key in override path: " + spec);
    if (dot == std::string::npos) {
      const json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline Scenario load_scenario_file(const std::string& path,
                                   const std::vector<std::string>& overrides = {},
                                   json* resolved = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kBadScenario, "cannot open scenario file: " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kBadScenario, std::string("scenario parse error: ") + e.what());
  }
  for (const std::string& o : overrides) apply_override(j, o);
  Scenario s = scenario_from_json(j);
  if (resolved != nullptr) *resolved = scenario_to_json(s);
  return s;
}

/// FNV-1a hash of the canonical serialized scenario; recorded in the log
/// sidecar so runs can be traced back to their exact configuration.
inline std::uint64_t scenario_hash(const Scenario& s) {
  const std::string dump = scenario_to_json(s).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace hatm::sim
