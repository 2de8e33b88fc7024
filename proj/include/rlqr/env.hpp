#pragma once

#include <Eigen/Dense>

#include "rlqr/lqr.hpp"
#include "rlqr/rng.hpp"

namespace rlqr {

// Torque-limited pendulum. theta = 0 is upright; theta wraps to (-pi, pi],
// so hanging straight down is theta = pi. Semi-implicit Euler: velocity
// first, then position with the new velocity.
struct PendulumParams {
  double mass = 0.4;        // kg
  double length = 0.37;     // m
  double damping = 0.1;     // N m s
  double torque_max = 0.8;  // N m, also the policy saturation scale
  double dt = 0.01;         // s
  double gravity = 9.81;    // m/s^2
  int episode_len = 1000;   // steps per episode before truncation

  // Quadratic cost weights; reward integrand is -(x'Qx + u'Ru) * dt.
  double q_theta = 1.0;
  double q_theta_dot = 0.1;
  double r_torque = 0.001;

  // Entering the exit set pays a bonus and (optionally) ends the episode.
  double exit_reward = 1000.0;
  double exit_theta = 0.05;      // rad
  double exit_theta_dot = 0.5;   // rad/s
  bool exit_terminates = true;

  void validate() const;  // throws ConfigError
};

struct PendulumState {
  double theta = 0.0;
  double theta_dot = 0.0;

  Eigen::Vector2d vec() const { return {theta, theta_dot}; }
};

struct StepResult {
  PendulumState next;
  double reward = 0.0;
  bool exit = false;  // entered the exit set on this step
  bool done = false;  // episode ends now (exit with termination enabled)
};

// Torque commands are clamped to [-torque_max, torque_max].
StepResult step(const PendulumParams& p, const PendulumState& s, double u);

bool in_exit_set(const PendulumParams& p, const PendulumState& s);

double wrap_angle(double theta);  // to (-pi, pi]

enum class ResetMode { Bottom, Uniform };

// Bottom starts hanging at rest; Uniform draws theta from
// [-reset_range, reset_range] around upright with zero velocity.
PendulumState reset(const PendulumParams& p, ResetMode mode, double reset_range,
                    Rng& rng);

// Linearization about the upright equilibrium with the episode cost weights.
LinearSystem linearize_upright(const PendulumParams& p);

}  // namespace rlqr
