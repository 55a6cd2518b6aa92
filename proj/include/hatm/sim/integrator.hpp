#pragma once

#include <Eigen/Dense>

#include <utility>

#include "hatm/errors.hpp"

namespace hatm::sim {

/// One classical fourth-order Runge-Kutta step. The derivative callback
/// is re-evaluated at every stage, so constraint outputs embedded in it
/// (normal force, slip) are recomputed per stage.
template <typename DerivFn>
Eigen::VectorXd integrate_step(const Eigen::VectorXd& state, DerivFn&& deriv, double dt) {
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::kBadInput, "integration step must be positive");
  }
  const Eigen::VectorXd k1 = deriv(state);
  const Eigen::VectorXd k2 = deriv(state + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = deriv(state + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = deriv(state + dt * k3);
  Eigen::VectorXd next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    throw Error(ErrorCode::kBadInput, "non-finite state after integration step");
  }
  return next;
}

}  // namespace hatm::sim
