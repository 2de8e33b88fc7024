#pragma once

#include <stdexcept>
#include <string>

namespace rlqr {

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Iterative solver failed to reach its tolerance.
struct NonConvergent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Constraint system has no solution (rank deficiency or inconsistent rows).
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Relaxed fit ran out of rounds without producing a stabilizing gain.
struct Unstabilizable : std::runtime_error {
  explicit Unstabilizable(const std::string& msg, double gain_error_ = 0.0)
      : std::runtime_error(msg), gain_error(gain_error_) {}
  double gain_error;
};

// Bias initialization could not push an effective bias past the floor.
struct InitFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rlqr
