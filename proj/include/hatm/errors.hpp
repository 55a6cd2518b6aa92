#pragma once

#include <stdexcept>
#include <string>

namespace hatm {

enum class ErrorCode {
  kFrameMismatch,
  kEulerSingularity,
  kContactLost,
  kInfeasibleAttitude,
  kNonPositiveThrust,
  kBalanceResidual,
  kSolverFailure,
  kSolverDiverged,
  kBadInput,
  kBadScenario,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kFrameMismatch: return "frame-mismatch";
    case ErrorCode::kEulerSingularity: return "euler-singularity";
    case ErrorCode::kContactLost: return "contact-lost";
    case ErrorCode::kInfeasibleAttitude: return "infeasible-attitude";
    case ErrorCode::kNonPositiveThrust: return "non-positive-thrust";
    case ErrorCode::kBalanceResidual: return "balance-residual";
    case ErrorCode::kSolverFailure: return "solver-failure";
    case ErrorCode::kSolverDiverged: return "solver-diverged";
    case ErrorCode::kBadInput: return "bad-input";
    case ErrorCode::kBadScenario: return "bad-scenario";
  }
  return "unknown";
}

/// Typed diagnostic carried by every hard failure in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hatm
