#pragma once

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hatm/errors.hpp"
#include "hatm/estimation.hpp"
#include "hatm/vehicle_model.hpp"

namespace hatm::sim {

/// Shortest round-trippable decimal form; keeps logs byte-stable across
/// runs while preserving the exact double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One logged tick of the closed-loop simulation.
struct LogRecord {
  double time = 0.0;
  int mode = 0;  // 0 aerial, 1 terrestrial
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d attitude = Eigen::Vector3d::Zero();
  Eigen::Vector3d body_rate = Eigen::Vector3d::Zero();
  Eigen::Vector3d ref_position = Eigen::Vector3d::Zero();
  double ref_yaw = 0.0;
  double u1 = 0.0, u2 = 0.0, u3 = 0.0, u4 = 0.0;
  double f_n = 0.0, f_left = 0.0, f_right = 0.0;
  int slip = 0;
  int contact = 0;
  double alpha = 0.0, beta = 0.0, v_rx = 0.0;
  Eigen::Vector3d arm_force = Eigen::Vector3d::Zero();   // body frame
  Eigen::Vector3d arm_torque = Eigen::Vector3d::Zero();  // body frame
  int est_valid = 0;
  AugVector estimate = AugVector::Zero();
  double gamma_hat = 0.0;  // NaN-free: only meaningful when est_valid
  double mhe_cost = 0.0;
  int mhe_iterations = 0;
};

struct TrajectoryLog {
  std::vector<LogRecord> records;

  static const std::vector<std::string>& columns() {
    static const std::vector<std::string> cols = {
        "t", "mode", "x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "p", "q", "r",
        "ref_x", "ref_y", "ref_z", "ref_yaw", "u1", "u2", "u3", "u4", "f_n", "f_left", "f_right",
        "slip", "contact", "alpha", "beta", "v_rx", "arm_fx", "arm_fy", "arm_fz", "arm_nx",
        "arm_ny", "arm_nz", "est_valid", "est_px", "est_py", "est_pz", "est_vx", "est_vy",
        "est_vz", "est_fx", "est_fy", "est_fz", "gamma_hat", "mhe_cost", "mhe_iterations"};
    return cols;
  }

  void to_csv(std::ostream& out) const {
    const auto& cols = columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out << cols[i] << (i + 1 < cols.size() ? "," : "\n");
    }
    for (const LogRecord& r : records) {
      std::vector<double> row = {r.time,
                                 static_cast<double>(r.mode),
                                 r.position.x(), r.position.y(), r.position.z(),
                                 r.velocity.x(), r.velocity.y(), r.velocity.z(),
                                 r.attitude.x(), r.attitude.y(), r.attitude.z(),
                                 r.body_rate.x(), r.body_rate.y(), r.body_rate.z(),
                                 r.ref_position.x(), r.ref_position.y(), r.ref_position.z(),
                                 r.ref_yaw, r.u1, r.u2, r.u3, r.u4,
                                 r.f_n, r.f_left, r.f_right,
                                 static_cast<double>(r.slip), static_cast<double>(r.contact),
                                 r.alpha, r.beta, r.v_rx,
                                 r.arm_force.x(), r.arm_force.y(), r.arm_force.z(),
                                 r.arm_torque.x(), r.arm_torque.y(), r.arm_torque.z(),
                                 static_cast<double>(r.est_valid)};
      for (int i = 0; i < kAugStateDim; ++i) row.push_back(r.estimate[i]);
      row.push_back(r.gamma_hat);
      row.push_back(r.mhe_cost);
      row.push_back(static_cast<double>(r.mhe_iterations));
      for (std::size_t i = 0; i < row.size(); ++i) {
        out << format_double(row[i]) << (i + 1 < row.size() ? "," : "\n");
      }
    }
  }
};

inline void write_log_with_sidecar(const TrajectoryLog& log, const nlohmann::json& scenario_json,
                                   std::uint64_t hash, const std::string& csv_path,
                                   const std::string& sidecar_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::kBadInput, "cannot open log output: " + csv_path);
  log.to_csv(csv);
  nlohmann::json side;
  side["schema_version"] = 1;
  side["scenario_hash"] = hash;
  side["scenario"] = scenario_json;
  std::ofstream sj(sidecar_path);
  if (!sj) throw Error(ErrorCode::kBadInput, "cannot open sidecar output: " + sidecar_path);
  sj << side.dump(2) << "\n";
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Parse a log written by TrajectoryLog::to_csv. Column order is taken
/// from the header so logs stay readable across schema additions.
inline TrajectoryLog read_log_csv(std::istream& in) {
  TrajectoryLog log;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kBadInput, "empty log file");
  const std::vector<std::string> header = detail::split_csv_line(line);
  auto col = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int c_t = col("t"), c_mode = col("mode"), c_x = col("x"), c_y = col("y"), c_z = col("z"),
            c_rx = col("ref_x"), c_ry = col("ref_y"), c_rz = col("ref_z"), c_u1 = col("u1"),
            c_ev = col("est_valid"), c_gh = col("gamma_hat");
  if (c_t < 0 || c_x < 0 || c_rx < 0) {
    throw Error(ErrorCode::kBadInput, "log file lacks the required columns");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    auto num = [&](int i) {
      if (i < 0 || i >= static_cast<int>(f.size())) return 0.0;
      try {
        return std::stod(f[i]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kBadInput, "bad CSV field '" + f[i] + "'");
      }
    };
    LogRecord r;
    r.time = num(c_t);
    r.mode = static_cast<int>(num(c_mode));
    r.position = {num(c_x), num(c_y), num(c_z)};
    r.ref_position = {num(c_rx), num(c_ry), num(c_rz)};
    r.u1 = num(c_u1);
    r.est_valid = static_cast<int>(num(c_ev));
    r.gamma_hat = num(c_gh);
    log.records.push_back(r);
  }
  return log;
}

/// Estimator replay record: (t, y1..y10, u1..u4).
struct EstimatorLogRow {
  double time = 0.0;
  MeasVector measurement = MeasVector::Zero();
  EstimatorInput input;
};

inline void write_estimator_input_csv(const std::vector<EstimatorLogRow>& rows, std::ostream& out) {
  out << "t";
  for (int i = 1; i <= kMeasurementDim; ++i) out << ",y" << i;
  for (int i = 1; i <= 4; ++i) out << ",u" << i;
  out << "\n";
  for (const auto& r : rows) {
    out << format_double(r.time);
    for (int i = 0; i < kMeasurementDim; ++i) out << "," << format_double(r.measurement[i]);
    const Eigen::Vector4d u = r.input.vector();
    for (int i = 0; i < 4; ++i) out << "," << format_double(u[i]);
    out << "\n";
  }
}

inline std::vector<EstimatorLogRow> read_estimator_input_csv(std::istream& in) {
  std::vector<EstimatorLogRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;  // header
    }
    EstimatorLogRow row;
    std::vector<double> vals;
    std::size_t start = 0;
    while (start <= line.size()) {
      const auto comma = line.find(',', start);
      const std::string tok = line.substr(start, comma == std::string::npos ? comma : comma - start);
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kBadInput, "bad CSV field '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (vals.size() != 1 + kMeasurementDim + 4) {
      throw Error(ErrorCode::kBadInput, "estimator replay rows need 15 columns");
    }
    row.time = vals[0];
    for (int i = 0; i < kMeasurementDim; ++i) row.measurement[i] = vals[1 + i];
    row.input.thrust = vals[11];
    row.input.roll = vals[12];
    row.input.pitch = vals[13];
    row.input.yaw = vals[14];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hatm::sim
