#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "rlqr/biasshift.hpp"
#include "rlqr/env.hpp"
#include "rlqr/net.hpp"
#include "rlqr/replay.hpp"

namespace rlqr {

enum class Variant { Original, InitOnly, LossOnly, InitAndRestrict, FullBiasShift };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

enum class OptimizerKind { Sgd, Adam };

struct TD3Config {
  long steps = 100000;
  int delay = 2;
  double gamma = 0.99;
  double tau = 0.005;
  // Negative noise values mean "derive from torque_max": sigma_e = 0.1 t,
  // sigma_s = 0.2 t, noise_clip = 0.5 t.
  double sigma_e = -1.0;
  double sigma_s = -1.0;
  double noise_clip = -1.0;
  int batch = 256;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  Variant variant = Variant::FullBiasShift;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  BiasRestrictMode restrict_mode = BiasRestrictMode::Shift;
  long warmup = 1000;
  long eval_interval = 1000;
  int eval_episodes = 10;
  std::size_t capacity = 1000000;
  int hidden1 = 512;
  int hidden2 = 256;
  double dropout = 0.1;
  bool critic_bias_shift = false;
  ResetMode reset_mode = ResetMode::Bottom;
  double reset_range = 0.4;
  // Optional episode abort when |theta_dot| exceeds the limit; the abort is
  // a reset, not a terminal for bootstrapping.
  bool velocity_abort = false;
  double velocity_abort_limit = 10.0;
  std::vector<long> checkpoint_steps;

  void validate() const;

  bool uses_bias_init() const {
    return variant == Variant::InitOnly || variant == Variant::InitAndRestrict ||
           variant == Variant::FullBiasShift;
  }
  bool uses_reg_loss() const {
    return variant == Variant::LossOnly || variant == Variant::FullBiasShift;
  }
  bool uses_restriction() const {
    return variant == Variant::InitAndRestrict ||
           variant == Variant::FullBiasShift;
  }
  double eff_sigma_e(double torque_max) const {
    return sigma_e >= 0 ? sigma_e : 0.1 * torque_max;
  }
  double eff_sigma_s(double torque_max) const {
    return sigma_s >= 0 ? sigma_s : 0.2 * torque_max;
  }
  double eff_noise_clip(double torque_max) const {
    return noise_clip >= 0 ? noise_clip : 0.5 * torque_max;
  }
};

// Moment buffers for the adaptive optimizer; empty and unused for plain SGD.
struct OptState {
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mb, vb;
  long t = 0;
};

OptState make_opt_state(const NetworkParams& net);

// Applies one descent step of `grads` scaled by lr.
void apply_update(NetworkParams& net, OptState& state, const Gradients& grads,
                  double lr, OptimizerKind kind);

struct MetricsRow {
  long step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double min_abs_bias = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
};

struct TrainResult {
  NetworkParams actor, critic1, critic2;
  std::vector<MetricsRow> metrics;
};

// Smoothed TD target y = r + gamma (1 - done) min_i Q_i'(s', pi'(s') + noise).
Eigen::VectorXd critic_target(const ReplayBuffer::Batch& batch,
                              const NetworkParams& critic1_t,
                              const NetworkParams& critic2_t,
                              const NetworkParams& actor_t,
                              const TD3Config& cfg, double action_limit,
                              Rng& noise_rng);

// One mean-squared-error step toward y; returns the pre-step loss.
double critic_update(const ReplayBuffer::Batch& batch, NetworkParams& critic,
                     OptState& opt, const Eigen::VectorXd& y, double lr,
                     OptimizerKind kind);

// One ascent step on mean Q1(s, pi(s)) minus the regularizer (when enabled).
// Returns the minimized objective value. Restriction is the caller's business
// so the pre-step bias snapshot stays in one place.
double actor_update(const ReplayBuffer::Batch& batch, NetworkParams& actor,
                    OptState& opt, const NetworkParams& critic1,
                    const TD3Config& cfg, const BiasShiftConfig& bias_cfg,
                    const Eigen::MatrixXd* k_target, double lr,
                    const std::optional<DropoutSpec>& dropout);

// Polyak averaging target <- tau * src + (1 - tau) * target.
void target_update(const NetworkParams& src, NetworkParams& target, double tau);

using CheckpointFn = std::function<void(
    long step, const NetworkParams& actor, const NetworkParams& critic1,
    const NetworkParams& critic2)>;

// Runs the full training loop. Deterministic given (env, cfg, bias_cfg,
// k_target, seed). k_target enables the gain/offset regularizer terms for
// variants that use the loss; pass nullptr to train without them.
TrainResult train(const PendulumParams& env, const TD3Config& cfg,
                  const BiasShiftConfig& bias_cfg,
                  const Eigen::MatrixXd* k_target, std::uint64_t seed,
                  const CheckpointFn& on_checkpoint = {});

// Noise-free rollout of the actor from a given start; returns the
// undiscounted return and leaves the trajectory in the out parameters when
// non-null.
struct EvalEpisode {
  double ret = 0.0;
  std::vector<PendulumState> states;
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<bool> dones;
  bool exited = false;
};

EvalEpisode rollout(const PendulumParams& env, const NetworkParams& actor,
                    const PendulumState& start, int max_steps,
                    bool record = false);

}  // namespace rlqr
