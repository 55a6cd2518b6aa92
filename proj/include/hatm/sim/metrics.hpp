#pragma once

#include <cmath>
#include <optional>

#include "hatm/errors.hpp"
#include "hatm/sim/logging.hpp"

namespace hatm::sim {

struct Metrics {
  double average_error = 0.0;       // m, Euclidean, after settle
  double max_error = 0.0;           // m
  Eigen::Vector3d rms_error = Eigen::Vector3d::Zero();
  std::optional<double> gamma_error;  // rad, last valid estimate vs truth
  double energy_proxy = 0.0;        // integral of U1 dt
};

/// Tracking statistics over the span after `settle_time`. The
/// inclination error uses the last record carrying a valid estimate.
inline Metrics compute_tracking_metrics(const TrajectoryLog& log, double settle_time = 0.0,
                                        std::optional<double> true_gamma = std::nullopt) {
  if (log.records.empty()) {
    throw Error(ErrorCode::kBadInput, "cannot compute metrics of an empty log");
  }
  Metrics m;
  Eigen::Vector3d sq_sum = Eigen::Vector3d::Zero();
  double err_sum = 0.0;
  std::size_t count = 0;
  double prev_t = log.records.front().time;
  for (const LogRecord& r : log.records) {
    m.energy_proxy += r.u1 * (r.time - prev_t);
    prev_t = r.time;
    if (r.time < settle_time) continue;
    const Eigen::Vector3d e = r.position - r.ref_position;
    const double err = e.norm();
    err_sum += err;
    m.max_error = std::max(m.max_error, err);
    sq_sum += e.cwiseProduct(e);
    ++count;
  }
  if (count > 0) {
    m.average_error = err_sum / static_cast<double>(count);
    m.rms_error = (sq_sum / static_cast<double>(count)).cwiseSqrt();
  }
  if (true_gamma) {
    for (auto it = log.records.rbegin(); it != log.records.rend(); ++it) {
      if (it->est_valid != 0) {
        m.gamma_error = std::abs(it->gamma_hat - *true_gamma);
        break;
      }
    }
  }
  return m;
}

}  // namespace hatm::sim
