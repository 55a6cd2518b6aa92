#pragma once

#include <Eigen/Dense>

#include <deque>
#include <optional>
#include <vector>

#include "hatm/errors.hpp"
#include "hatm/math_utils.hpp"

namespace hatm {

inline constexpr int kAugStateDim = 9;    // position, velocity, external force
inline constexpr int kMeasurementDim = 10;

using AugVector = Eigen::Matrix<double, kAugStateDim, 1>;
using AugMatrix = Eigen::Matrix<double, kAugStateDim, kAugStateDim>;
using MeasVector = Eigen::Matrix<double, kMeasurementDim, 1>;
using MeasMatrix = Eigen::Matrix<double, kMeasurementDim, kMeasurementDim>;
using MeasJacobian = Eigen::Matrix<double, kMeasurementDim, kAugStateDim>;

/// Translational state augmented with the external force, world frame.
struct AugmentedState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d force = Eigen::Vector3d::Zero();

  AugVector vector() const {
    AugVector x;
    x << position, velocity, force;
    return x;
  }

  static AugmentedState from_vector(const AugVector& x) {
    AugmentedState s;
    s.position = x.segment<3>(0);
    s.velocity = x.segment<3>(3);
    s.force = x.segment<3>(6);
    return s;
  }
};

/// Thrust magnitude and attitude, treated as known inputs of the reduced
/// translational model (and echoed in the measurement vector).
struct EstimatorInput {
  double thrust = 0.0;  // U1, N
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Eigen::Vector4d vector() const { return {thrust, roll, pitch, yaw}; }
};

struct EstimatorParams {
  double mass = 2.4;
  double gravity = 9.81;
};

/// One forward-Euler step of the reduced translational dynamics with the
/// external force held constant. `known_accel` carries any modelled
/// non-thrust force (the arm reaction) as an acceleration.
inline AugmentedState process_model(const AugmentedState& x, const EstimatorInput& u, double dt,
                                    const EstimatorParams& p,
                                    const Eigen::Vector3d& known_accel = Eigen::Vector3d::Zero()) {
  const Eigen::Matrix3d r = euler_zyx_to_matrix(u.roll, u.pitch, u.yaw);
  const Eigen::Vector3d accel = r * Eigen::Vector3d(0.0, 0.0, u.thrust) / p.mass -
                                Eigen::Vector3d(0.0, 0.0, p.gravity) + x.force / p.mass + known_accel;
  AugmentedState out;
  out.position = x.position + x.velocity * dt;
  out.velocity = x.velocity + accel * dt;
  out.force = x.force;
  return out;
}

inline AugMatrix process_jacobian(double dt, const EstimatorParams& p) {
  AugMatrix f = AugMatrix::Identity();
  f.block<3, 3>(0, 3) = dt * Eigen::Matrix3d::Identity();
  f.block<3, 3>(3, 6) = (dt / p.mass) * Eigen::Matrix3d::Identity();
  return f;
}

/// Position and velocity stacked with the input echo.
inline MeasVector measurement_model(const AugmentedState& x, const EstimatorInput& u) {
  MeasVector y;
  y << x.position, x.velocity, u.vector();
  return y;
}

inline MeasJacobian measurement_jacobian() {
  MeasJacobian h = MeasJacobian::Zero();
  h.block<6, 6>(0, 0).setIdentity();
  return h;
}

struct NoiseModel {
  AugMatrix process = AugMatrix::Identity();
  MeasMatrix measurement = MeasMatrix::Identity();

  static NoiseModel standard() {
    NoiseModel n;
    AugVector q;
    q << 1e-6, 1e-6, 1e-6, 1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2;
    n.process = q.asDiagonal();
    MeasVector r;
    r << 1e-4, 1e-4, 1e-4, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3;
    n.measurement = r.asDiagonal();
    return n;
  }
};

struct WindowSample {
  double time = 0.0;
  MeasVector measurement = MeasVector::Zero();
  EstimatorInput input;
  Eigen::Vector3d known_accel = Eigen::Vector3d::Zero();
};

/// Sliding estimation window: the most recent N+1 samples plus the prior
/// summarizing everything older.
struct EstimationWindow {
  int horizon = 20;  // N; the window holds N+1 samples
  std::deque<WindowSample> samples;
  AugmentedState prior_state;
  AugMatrix prior_covariance = AugMatrix::Identity();

  bool full() const { return static_cast<int>(samples.size()) == horizon + 1; }

  void push(const WindowSample& s) {
    if (full()) {
      throw Error(ErrorCode::kBadInput, "window already full; absorb the oldest sample first");
    }
    samples.push_back(s);
  }
};

/// Absorbs one (measurement, input) pair into the prior and advances it
/// one step: a Kalman update with the sample followed by a predict
/// through the process model, constraints ignored. Joseph-form update
/// keeps the covariance positive definite; it is symmetrized afterwards.
inline void arrival_cost_update(AugmentedState& prior, AugMatrix& covariance,
                                const MeasVector& measurement, const EstimatorInput& input,
                                const NoiseModel& noise, double dt, const EstimatorParams& params,
                                const Eigen::Vector3d& known_accel = Eigen::Vector3d::Zero()) {
  const MeasJacobian h = measurement_jacobian();
  const MeasMatrix s = h * covariance * h.transpose() + noise.measurement;
  const Eigen::LDLT<MeasMatrix> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::kSolverFailure, "innovation covariance is not invertible");
  }
  const Eigen::Matrix<double, kAugStateDim, kMeasurementDim> gain =
      covariance * h.transpose() * ldlt.solve(MeasMatrix::Identity());
  const MeasVector innovation = measurement - measurement_model(prior, input);
  const AugVector updated = prior.vector() + gain * innovation;
  const AugMatrix ikh = AugMatrix::Identity() - gain * h;
  AugMatrix p_upd = ikh * covariance * ikh.transpose() + gain * noise.measurement * gain.transpose();

  const AugMatrix f = process_jacobian(dt, params);
  prior = process_model(AugmentedState::from_vector(updated), input, dt, params, known_accel);
  covariance = f * p_upd * f.transpose() + noise.process;
  covariance = 0.5 * (covariance + covariance.transpose()).eval();
}

struct MheDiagnostics {
  int iterations = 0;
  double cost = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> cost_history;  // accepted iterates, non-increasing
};

struct MheSolution {
  std::vector<AugmentedState> trajectory;  // window states, oldest first
  Eigen::Vector3d force = Eigen::Vector3d::Zero();  // estimate at the window head
  MheDiagnostics diagnostics;
};

/// Non-convergence diagnostic carrying the last iterate.
class MheDivergedError : public Error {
 public:
  MheDivergedError(const std::string& what, MheSolution last)
      : Error(ErrorCode::kSolverDiverged, what), last_iterate(std::move(last)) {}

  MheSolution last_iterate;
};

struct MheSolverConfig {
  int max_iterations = 25;
  double gradient_tolerance = 1e-9;
  int max_step_halvings = 30;
  // Optional box constraints on the state, enforced by projection after
  // each accepted step; unbounded by default.
  std::optional<AugVector> lower_bound;
  std::optional<AugVector> upper_bound;
};

namespace detail {

/// Weighted residual of the three-term window cost, stacked as
/// [measurement terms; process terms; arrival term]. Weights are the
/// inverse Cholesky factors of the covariances.
class MheProblem {
 public:
  MheProblem(const EstimationWindow& window, const NoiseModel& noise, const EstimatorParams& params)
      : window_(window), params_(params) {
    n_ = static_cast<int>(window.samples.size());
    state_dim_ = kAugStateDim * n_;
    resid_dim_ = kMeasurementDim * n_ + kAugStateDim * (n_ - 1) + kAugStateDim;
    meas_chol_ = Eigen::LLT<MeasMatrix>(noise.measurement);
    proc_chol_ = Eigen::LLT<AugMatrix>(noise.process);
    prior_chol_ = Eigen::LLT<AugMatrix>(window.prior_covariance);
    if (meas_chol_.info() != Eigen::Success || proc_chol_.info() != Eigen::Success ||
        prior_chol_.info() != Eigen::Success) {
      throw Error(ErrorCode::kBadInput, "noise/prior covariances must be positive definite");
    }
    dt_ = n_ > 1 ? window.samples[1].time - window.samples[0].time : 0.0;
  }

  int state_dim() const { return state_dim_; }
  int sample_count() const { return n_; }
  double dt() const { return dt_; }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(resid_dim_);
    int row = 0;
    for (int k = 0; k < n_; ++k) {
      const AugmentedState xk = state_at(x, k);
      const MeasVector err = window_.samples[k].measurement - measurement_model(xk, window_.samples[k].input);
      r.segment<kMeasurementDim>(row) = meas_chol_.matrixL().solve(err);
      row += kMeasurementDim;
    }
    for (int k = 0; k + 1 < n_; ++k) {
      const AugmentedState xk = state_at(x, k);
      const AugmentedState pred =
          process_model(xk, window_.samples[k].input, dt_, params_, window_.samples[k].known_accel);
      const AugVector err = state_at(x, k + 1).vector() - pred.vector();
      r.segment<kAugStateDim>(row) = proc_chol_.matrixL().solve(err);
      row += kAugStateDim;
    }
    const AugVector arr = state_at(x, 0).vector() - window_.prior_state.vector();
    r.segment<kAugStateDim>(row) = prior_chol_.matrixL().solve(arr);
    return r;
  }

  Eigen::MatrixXd jacobian() const {
    // The residual is linear in the states, so the Jacobian does not
    // depend on the current iterate.
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(resid_dim_, state_dim_);
    const MeasJacobian h = measurement_jacobian();
    const MeasJacobian h_w = -meas_chol_.matrixL().solve(h);
    const AugMatrix f = process_jacobian(dt_, params_);
    const AugMatrix eye_w = proc_chol_.matrixL().solve(AugMatrix::Identity());
    const AugMatrix f_w = -(eye_w * f).eval();
    int row = 0;
    for (int k = 0; k < n_; ++k) {
      j.block<kMeasurementDim, kAugStateDim>(row, kAugStateDim * k) = h_w;
      row += kMeasurementDim;
    }
    for (int k = 0; k + 1 < n_; ++k) {
      j.block<kAugStateDim, kAugStateDim>(row, kAugStateDim * k) = f_w;
      j.block<kAugStateDim, kAugStateDim>(row, kAugStateDim * (k + 1)) = eye_w;
      row += kAugStateDim;
    }
    j.block<kAugStateDim, kAugStateDim>(row, 0) = prior_chol_.matrixL().solve(AugMatrix::Identity());
    return j;
  }

  static AugmentedState state_at(const Eigen::VectorXd& x, int k) {
    return AugmentedState::from_vector(x.segment<kAugStateDim>(kAugStateDim * k));
  }

 private:
  const EstimationWindow& window_;
  EstimatorParams params_;
  int n_ = 0;
  int state_dim_ = 0;
  int resid_dim_ = 0;
  double dt_ = 0.0;
  Eigen::LLT<MeasMatrix> meas_chol_;
  Eigen::LLT<AugMatrix> proc_chol_;
  Eigen::LLT<AugMatrix> prior_chol_;
};

}  // namespace detail

/// Solves the window least-squares problem by damped Gauss-Newton with a
/// step-halving line search. The warm start, when given, must hold one
/// state per window sample.
inline MheSolution mhe_solve(const EstimationWindow& window, const NoiseModel& noise,
                             const EstimatorParams& params, const MheSolverConfig& config = {},
                             const std::vector<AugmentedState>* warm_start = nullptr) {
  if (!window.full()) {
    throw Error(ErrorCode::kBadInput, "window must hold horizon+1 samples before solving");
  }
  detail::MheProblem problem(window, noise, params);
  const int n = problem.sample_count();

  Eigen::VectorXd x(problem.state_dim());
  if (warm_start != nullptr && static_cast<int>(warm_start->size()) == n) {
    for (int k = 0; k < n; ++k) x.segment<kAugStateDim>(kAugStateDim * k) = (*warm_start)[k].vector();
  } else {
    // Cold start: propagate the prior through the window inputs.
    AugmentedState s = window.prior_state;
    for (int k = 0; k < n; ++k) {
      x.segment<kAugStateDim>(kAugStateDim * k) = s.vector();
      if (k + 1 < n) {
        s = process_model(s, window.samples[k].input, problem.dt(), params,
                          window.samples[k].known_accel);
      }
    }
  }

  const auto project = [&](Eigen::VectorXd& v) {
    if (!config.lower_bound && !config.upper_bound) return;
    for (int k = 0; k < n; ++k) {
      auto seg = v.segment<kAugStateDim>(kAugStateDim * k);
      if (config.lower_bound) seg = seg.cwiseMax(*config.lower_bound);
      if (config.upper_bound) seg = seg.cwiseMin(*config.upper_bound);
    }
  };
  project(x);

  const auto extract = [&](const Eigen::VectorXd& v, MheDiagnostics diag) {
    MheSolution sol;
    sol.trajectory.reserve(n);
    for (int k = 0; k < n; ++k) sol.trajectory.push_back(detail::MheProblem::state_at(v, k));
    sol.force = sol.trajectory.back().force;
    sol.diagnostics = std::move(diag);
    return sol;
  };

  Eigen::VectorXd r = problem.residual(x);
  double cost = r.squaredNorm();
  const Eigen::MatrixXd j = problem.jacobian();
  const Eigen::MatrixXd jtj = j.transpose() * j;

  MheDiagnostics diag;
  diag.cost_history.push_back(cost);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const Eigen::VectorXd gradient = 2.0 * j.transpose() * r;
    diag.gradient_norm = gradient.lpNorm<Eigen::Infinity>();
    diag.cost = cost;
    diag.iterations = iter;
    if (diag.gradient_norm <= config.gradient_tolerance) {
      return extract(x, diag);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(jtj);
    if (ldlt.info() != Eigen::Success) {
      throw Error(ErrorCode::kSolverFailure, "normal equations are singular");
    }
    const Eigen::VectorXd step = ldlt.solve(-j.transpose() * r);
    if (!step.allFinite()) {
      throw Error(ErrorCode::kSolverFailure, "non-finite step from normal equations");
    }

    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < config.max_step_halvings; ++h) {
      Eigen::VectorXd candidate = x + scale * step;
      project(candidate);
      const Eigen::VectorXd rc = problem.residual(candidate);
      const double cc = rc.squaredNorm();
      if (cc < cost) {
        x = candidate;
        r = rc;
        cost = cc;
        diag.cost_history.push_back(cost);
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) {
      // No descent direction left; at a linear problem's optimum the
      // gradient check above exits first, so reaching this means the
      // tolerance is tighter than the arithmetic allows.
      diag.cost = cost;
      diag.iterations = iter + 1;
      return extract(x, diag);
    }
  }
  const Eigen::VectorXd gradient = 2.0 * j.transpose() * r;
  diag.gradient_norm = gradient.lpNorm<Eigen::Infinity>();
  diag.cost = cost;
  diag.iterations = config.max_iterations;
  if (diag.gradient_norm > config.gradient_tolerance) {
    throw MheDivergedError("no convergence within max iterations", extract(x, diag));
  }
  return extract(x, diag);
}

/// Surface inclination implied by an estimated contact force: the angle
/// of the force from the world vertical. Returns nothing while the force
/// is below the noise floor.
inline std::optional<double> inclination_from_force(const Eigen::Vector3d& force,
                                                    double noise_floor = 0.5) {
  if (force.norm() < noise_floor) return std::nullopt;
  return std::atan2(std::hypot(force.x(), force.y()), force.z());
}

/// Owns the sliding window, prior recursion and warm start for one
/// estimation stream.
class MovingHorizonEstimator {
 public:
  struct Config {
    int horizon = 20;
    double period = 0.01;  // s between samples
    EstimatorParams params;
    NoiseModel noise = NoiseModel::standard();
    MheSolverConfig solver;
    double force_noise_floor = 0.5;  // N
  };

  explicit MovingHorizonEstimator(const Config& cfg) : cfg_(cfg) {
    window_.horizon = cfg.horizon;
    window_.prior_covariance = AugMatrix::Identity();
  }

  /// Seed the prior before the first sample.
  void set_prior(const AugmentedState& state, const AugMatrix& covariance) {
    window_.prior_state = state;
    window_.prior_covariance = covariance;
  }

  /// Feed one sample; returns the solution once the window is full.
  std::optional<MheSolution> step(double time, const MeasVector& measurement,
                                  const EstimatorInput& input,
                                  const Eigen::Vector3d& known_accel = Eigen::Vector3d::Zero()) {
    window_.push(WindowSample{time, measurement, input, known_accel});
    if (!window_.full()) return std::nullopt;

    auto solution = mhe_solve(window_, cfg_.noise, cfg_.params, cfg_.solver,
                              warm_.empty() ? nullptr : &warm_);

    // Slide: absorb the oldest sample into the prior, then shift the
    // warm start and append a propagated guess for the next sample.
    const WindowSample oldest = window_.samples.front();
    arrival_cost_update(window_.prior_state, window_.prior_covariance, oldest.measurement,
                        oldest.input, cfg_.noise, cfg_.period, cfg_.params, oldest.known_accel);
    window_.samples.pop_front();
    warm_ = solution.trajectory;
    warm_.erase(warm_.begin());
    warm_.push_back(process_model(solution.trajectory.back(), window_.samples.back().input,
                                  cfg_.period, cfg_.params, window_.samples.back().known_accel));

    return solution;
  }

  std::optional<double> inclination(const MheSolution& sol) const {
    return inclination_from_force(sol.force, cfg_.force_noise_floor);
  }

  const EstimationWindow& window() const { return window_; }
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
  EstimationWindow window_;
  std::vector<AugmentedState> warm_;
};

}  // namespace hatm
