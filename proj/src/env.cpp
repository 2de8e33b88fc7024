#include "rlqr/env.hpp"

#include <cmath>

#include "rlqr/errors.hpp"

namespace rlqr {

void PendulumParams::validate() const {
  if (mass <= 0 || length <= 0 || damping <= 0 || torque_max <= 0 || dt <= 0 ||
      gravity <= 0 || episode_len <= 0)
    throw ConfigError("pendulum physical parameters must be positive");
  if (dt > 0.02) throw ConfigError("dt above 0.02 is too coarse for this plant");
  if (q_theta < 0 || q_theta_dot < 0 || r_torque <= 0)
    throw ConfigError("cost weights must be nonnegative, r_torque positive");
  if (exit_theta <= 0 || exit_theta_dot <= 0)
    throw ConfigError("exit region bounds must be positive");
}

double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

bool in_exit_set(const PendulumParams& p, const PendulumState& s) {
  return std::abs(s.theta) <= p.exit_theta &&
         std::abs(s.theta_dot) <= p.exit_theta_dot;
}

StepResult step(const PendulumParams& p, const PendulumState& s, double u) {
  u = std::clamp(u, -p.torque_max, p.torque_max);
  const double ml2 = p.mass * p.length * p.length;
  double acc = (p.gravity / p.length) * std::sin(s.theta) -
               (p.damping / ml2) * s.theta_dot + u / ml2;
  StepResult out;
  out.next.theta_dot = s.theta_dot + acc * p.dt;
  out.next.theta = wrap_angle(s.theta + out.next.theta_dot * p.dt);
  double quad = p.q_theta * s.theta * s.theta +
                p.q_theta_dot * s.theta_dot * s.theta_dot +
                p.r_torque * u * u;
  out.reward = -quad * p.dt;
  // The bonus pays on the transition into the exit set, so a non-terminating
  // episode is not paid again for merely staying inside.
  out.exit = !in_exit_set(p, s) && in_exit_set(p, out.next);
  if (out.exit) out.reward += p.exit_reward;
  out.done = out.exit && p.exit_terminates;
  return out;
}

PendulumState reset(const PendulumParams&, ResetMode mode, double reset_range,
                    Rng& rng) {
  if (mode == ResetMode::Bottom) return {M_PI, 0.0};
  return {rng.uniform(-reset_range, reset_range), 0.0};
}

LinearSystem linearize_upright(const PendulumParams& p) {
  const double ml2 = p.mass * p.length * p.length;
  LinearSystem sys;
  sys.A.resize(2, 2);
  sys.A << 0.0, 1.0, p.gravity / p.length, -p.damping / ml2;
  sys.B.resize(2, 1);
  sys.B << 0.0, 1.0 / ml2;
  sys.Q = Eigen::Vector2d(p.q_theta, p.q_theta_dot).asDiagonal();
  sys.R = Eigen::MatrixXd::Constant(1, 1, p.r_torque);
  return sys;
}

}  // namespace rlqr
