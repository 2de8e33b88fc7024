#include "rlqr/td3.hpp"

#include <algorithm>
#include <cmath>

#include "rlqr/errors.hpp"

namespace rlqr {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Original: return "original";
    case Variant::InitOnly: return "init_only";
    case Variant::LossOnly: return "loss_only";
    case Variant::InitAndRestrict: return "init_and_restrict";
    case Variant::FullBiasShift: return "full_bias_shift";
  }
  throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "original") return Variant::Original;
  if (name == "init_only") return Variant::InitOnly;
  if (name == "loss_only") return Variant::LossOnly;
  if (name == "init_and_restrict") return Variant::InitAndRestrict;
  if (name == "full_bias_shift") return Variant::FullBiasShift;
  throw ConfigError("unknown variant '" + name + "'");
}

void TD3Config::validate() const {
  if (steps < 0) throw ConfigError("steps must be nonnegative");
  if (delay < 1) throw ConfigError("delay must be at least 1");
  if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("gamma must be in (0,1)");
  if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must be in (0,1]");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (actor_lr <= 0 || critic_lr <= 0) throw ConfigError("learning rates must be positive");
  if (warmup < static_cast<long>(batch))
    throw ConfigError("warmup must cover at least one batch");
  if (eval_interval < 1) throw ConfigError("eval_interval must be positive");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
  if (capacity < static_cast<std::size_t>(batch))
    throw ConfigError("capacity must hold at least one batch");
  if (hidden1 < 1 || hidden2 < 1) throw ConfigError("hidden sizes must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (reset_range <= 0.0) throw ConfigError("reset_range must be positive");
  if (velocity_abort && velocity_abort_limit <= 0.0)
    throw ConfigError("velocity abort limit must be positive");
}

OptState make_opt_state(const NetworkParams& net) {
  OptState st;
  for (const auto& layer : net.layers) {
    st.mW.push_back(Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()));
    st.vW.push_back(Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()));
    st.mb.push_back(Eigen::VectorXd::Zero(layer.b.size()));
    st.vb.push_back(Eigen::VectorXd::Zero(layer.b.size()));
  }
  return st;
}

void apply_update(NetworkParams& net, OptState& state, const Gradients& grads,
                  double lr, OptimizerKind kind) {
  const std::size_t L = net.layers.size();
  if (grads.dW.size() != L)
    throw DimensionMismatch("gradient count does not match layer count");
  if (kind == OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < L; ++l) {
      net.layers[l].W -= lr * grads.dW[l];
      net.layers[l].b -= lr * grads.db[l];
    }
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < L; ++l) {
    state.mW[l] = beta1 * state.mW[l] + (1.0 - beta1) * grads.dW[l];
    state.vW[l] = beta2 * state.vW[l].array().matrix() +
                  (1.0 - beta2) * grads.dW[l].array().square().matrix();
    net.layers[l].W.array() -=
        lr * (state.mW[l].array() / bc1) /
        ((state.vW[l].array() / bc2).sqrt() + eps);
    state.mb[l] = beta1 * state.mb[l] + (1.0 - beta1) * grads.db[l];
    state.vb[l] = beta2 * state.vb[l].array().matrix() +
                  (1.0 - beta2) * grads.db[l].array().square().matrix();
    net.layers[l].b.array() -=
        lr * (state.mb[l].array() / bc1) /
        ((state.vb[l].array() / bc2).sqrt() + eps);
  }
}

namespace {

Eigen::MatrixXd concat_sa(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd sa(s.rows(), s.cols() + a.cols());
  sa << s, a;
  return sa;
}

}  // namespace

Eigen::VectorXd critic_target(const ReplayBuffer::Batch& batch,
                              const NetworkParams& critic1_t,
                              const NetworkParams& critic2_t,
                              const NetworkParams& actor_t,
                              const TD3Config& cfg, double action_limit,
                              Rng& noise_rng) {
  const double sig = cfg.eff_sigma_s(action_limit);
  const double clip = cfg.eff_noise_clip(action_limit);
  Eigen::MatrixXd a_next = forward(actor_t, batch.s_next);
  for (Eigen::Index i = 0; i < a_next.rows(); ++i)
    for (Eigen::Index j = 0; j < a_next.cols(); ++j) {
      double noise = std::clamp(sig * noise_rng.normal(), -clip, clip);
      a_next(i, j) =
          std::clamp(a_next(i, j) + noise, -action_limit, action_limit);
    }
  Eigen::MatrixXd sa = concat_sa(batch.s_next, a_next);
  Eigen::VectorXd q1 = forward(critic1_t, sa).col(0);
  Eigen::VectorXd q2 = forward(critic2_t, sa).col(0);
  Eigen::VectorXd q_min = q1.cwiseMin(q2);
  return batch.r.array() +
         cfg.gamma * (1.0 - batch.done.array()) * q_min.array();
}

double critic_update(const ReplayBuffer::Batch& batch, NetworkParams& critic,
                     OptState& opt, const Eigen::VectorXd& y, double lr,
                     OptimizerKind kind) {
  const double n = static_cast<double>(batch.s.rows());
  Eigen::MatrixXd sa = concat_sa(batch.s, batch.a);
  ForwardCache cache;
  Eigen::VectorXd q = forward(critic, sa, &cache).col(0);
  Eigen::VectorXd err = q - y;
  double loss = err.squaredNorm() / n;
  Eigen::MatrixXd dOut = (2.0 / n) * err;
  Gradients g = backward(critic, cache, dOut);
  apply_update(critic, opt, g, lr, kind);
  return loss;
}

double actor_update(const ReplayBuffer::Batch& batch, NetworkParams& actor,
                    OptState& opt, const NetworkParams& critic1,
                    const TD3Config& cfg, const BiasShiftConfig& bias_cfg,
                    const Eigen::MatrixXd* k_target, double lr,
                    const std::optional<DropoutSpec>& dropout) {
  const double n = static_cast<double>(batch.s.rows());
  ForwardCache actor_cache;
  Eigen::MatrixXd a = forward(actor, batch.s, &actor_cache, dropout);
  Eigen::MatrixXd sa = concat_sa(batch.s, a);
  ForwardCache critic_cache;
  Eigen::VectorXd q = forward(critic1, sa, &critic_cache).col(0);
  // Objective to minimize: -mean(Q) plus the penalty when enabled.
  Eigen::MatrixXd dOut = Eigen::MatrixXd::Constant(q.size(), 1, -1.0 / n);
  Gradients critic_g = backward(critic1, critic_cache, dOut);
  Eigen::MatrixXd dA = critic_g.dX.rightCols(a.cols());
  Gradients g = backward(actor, actor_cache, dA);
  double obj = -q.mean();
  if (cfg.uses_reg_loss())
    obj += regularization(actor, bias_cfg, k_target, &g);
  apply_update(actor, opt, g, lr, cfg.optimizer);
  return obj;
}

void target_update(const NetworkParams& src, NetworkParams& target, double tau) {
  if (src.layers.size() != target.layers.size())
    throw DimensionMismatch("target network shape mismatch");
  for (std::size_t l = 0; l < src.layers.size(); ++l) {
    target.layers[l].W = tau * src.layers[l].W + (1.0 - tau) * target.layers[l].W;
    target.layers[l].b = tau * src.layers[l].b + (1.0 - tau) * target.layers[l].b;
  }
}

EvalEpisode rollout(const PendulumParams& env, const NetworkParams& actor,
                    const PendulumState& start, int max_steps, bool record) {
  EvalEpisode ep;
  PendulumState s = start;
  for (int t = 0; t < max_steps; ++t) {
    double u = forward_one(actor, s.vec())(0);
    StepResult res = step(env, s, u);
    ep.ret += res.reward;
    if (record) {
      ep.states.push_back(s);
      ep.actions.push_back(std::clamp(u, -env.torque_max, env.torque_max));
      ep.rewards.push_back(res.reward);
      ep.dones.push_back(res.done);
    }
    s = res.next;
    if (res.exit) ep.exited = true;
    if (res.done) break;
  }
  if (record) ep.states.push_back(s);
  return ep;
}

TrainResult train(const PendulumParams& env, const TD3Config& cfg,
                  const BiasShiftConfig& bias_cfg,
                  const Eigen::MatrixXd* k_target, std::uint64_t seed,
                  const CheckpointFn& on_checkpoint) {
  env.validate();
  cfg.validate();
  const int s_dim = 2, a_dim = 1;
  const double limit = env.torque_max;

  Rng actor_rng(Rng::derive(seed, streams::kActorInit));
  Rng c1_rng(Rng::derive(seed, streams::kCritic1Init));
  Rng c2_rng(Rng::derive(seed, streams::kCritic2Init));
  std::vector<NetSpecLayer> actor_spec = {{cfg.hidden1, Activation::Relu},
                                          {cfg.hidden2, Activation::Relu},
                                          {a_dim, Activation::Tanh}};
  std::vector<NetSpecLayer> critic_spec = {{cfg.hidden1, Activation::Relu},
                                           {cfg.hidden2, Activation::Swish},
                                           {1, Activation::Identity}};
  TrainResult out;
  out.actor = init_network(s_dim, actor_spec, limit, actor_rng);
  out.critic1 = init_network(s_dim + a_dim, critic_spec, 1.0, c1_rng);
  out.critic2 = init_network(s_dim + a_dim, critic_spec, 1.0, c2_rng);
  if (cfg.uses_bias_init()) {
    Rng ab(Rng::derive(seed, streams::kActorBias));
    initialize_biases(out.actor, bias_cfg, ab);
    if (cfg.critic_bias_shift) {
      Rng cb1(Rng::derive(seed, streams::kCritic1Bias));
      Rng cb2(Rng::derive(seed, streams::kCritic2Bias));
      initialize_biases(out.critic1, bias_cfg, cb1);
      initialize_biases(out.critic2, bias_cfg, cb2);
    }
  }
  NetworkParams actor_t = out.actor;
  NetworkParams critic1_t = out.critic1;
  NetworkParams critic2_t = out.critic2;
  OptState actor_opt = make_opt_state(out.actor);
  OptState c1_opt = make_opt_state(out.critic1);
  OptState c2_opt = make_opt_state(out.critic2);

  auto checkpoint_due = [&](long t) {
    return std::find(cfg.checkpoint_steps.begin(), cfg.checkpoint_steps.end(),
                     t) != cfg.checkpoint_steps.end();
  };
  if (on_checkpoint && checkpoint_due(0))
    on_checkpoint(0, out.actor, out.critic1, out.critic2);
  if (cfg.steps == 0) return out;

  ReplayBuffer buffer(cfg.capacity, s_dim, a_dim,
                      Rng::derive(seed, streams::kReplay));
  Rng explore_rng(Rng::derive(seed, streams::kExploration));
  Rng target_rng(Rng::derive(seed, streams::kTargetNoise));
  Rng reset_rng(Rng::derive(seed, streams::kReset));
  Rng warmup_rng(Rng::derive(seed, streams::kWarmup));

  PendulumState s = reset(env, cfg.reset_mode, cfg.reset_range, reset_rng);
  int ep_steps = 0;
  auto end_episode_check = [&](const StepResult& res) {
    ++ep_steps;
    bool reset_now = res.done || ep_steps >= env.episode_len;
    if (cfg.velocity_abort &&
        std::abs(res.next.theta_dot) > cfg.velocity_abort_limit)
      reset_now = true;
    if (reset_now) {
      s = reset(env, cfg.reset_mode, cfg.reset_range, reset_rng);
      ep_steps = 0;
    } else {
      s = res.next;
    }
  };

  for (long t = 0; t < cfg.warmup; ++t) {
    Eigen::VectorXd a(1);
    a(0) = warmup_rng.uniform(-limit, limit);
    StepResult res = step(env, s, a(0));
    buffer.add(s.vec(), a, res.reward, res.next.vec(), res.done);
    end_episode_check(res);
  }

  double last_actor_loss = 0.0, last_critic_loss = 0.0;
  const double sig_e = cfg.eff_sigma_e(limit);
  for (long t = 1; t <= cfg.steps; ++t) {
    Eigen::VectorXd a = forward_one(out.actor, s.vec());
    for (Eigen::Index j = 0; j < a.size(); ++j)
      a(j) = std::clamp(a(j) + sig_e * explore_rng.normal(), -limit, limit);
    StepResult res = step(env, s, a(0));
    buffer.add(s.vec(), a, res.reward, res.next.vec(), res.done);
    end_episode_check(res);

    ReplayBuffer::Batch batch = buffer.sample(cfg.batch);
    Eigen::VectorXd y = critic_target(batch, critic1_t, critic2_t, actor_t,
                                      cfg, limit, target_rng);
    double l1 = critic_update(batch, out.critic1, c1_opt, y, cfg.critic_lr,
                              cfg.optimizer);
    double l2 = critic_update(batch, out.critic2, c2_opt, y, cfg.critic_lr,
                              cfg.optimizer);
    last_critic_loss = 0.5 * (l1 + l2);

    if (t % cfg.delay == 0) {
      std::optional<DropoutSpec> drop;
      if (cfg.dropout > 0.0)
        drop = DropoutSpec{cfg.dropout,
                           Rng::derive(Rng::derive(seed, streams::kDropout),
                                       static_cast<std::uint64_t>(t))};
      std::vector<Eigen::VectorXd> pre_step;
      if (cfg.uses_restriction() &&
          cfg.restrict_mode == BiasRestrictMode::Revert)
        pre_step = collect_biases(out.actor);
      last_actor_loss =
          actor_update(batch, out.actor, actor_opt, out.critic1, cfg, bias_cfg,
                       k_target, cfg.actor_lr, drop);
      if (cfg.uses_restriction())
        enforce_bias_magnitude(out.actor, bias_cfg.m, cfg.restrict_mode,
                               pre_step.empty() ? nullptr : &pre_step);
      target_update(out.actor, actor_t, cfg.tau);
      target_update(out.critic1, critic1_t, cfg.tau);
      target_update(out.critic2, critic2_t, cfg.tau);
    }

    if (t % cfg.eval_interval == 0) {
      Rng eval_rng(Rng::derive(Rng::derive(seed, streams::kEval),
                               static_cast<std::uint64_t>(t)));
      double sum = 0.0, sum2 = 0.0;
      for (int e = 0; e < cfg.eval_episodes; ++e) {
        PendulumState s0 = reset(env, cfg.reset_mode, cfg.reset_range, eval_rng);
        EvalEpisode ep = rollout(env, out.actor, s0, env.episode_len);
        sum += ep.ret;
        sum2 += ep.ret * ep.ret;
      }
      double mean = sum / cfg.eval_episodes;
      double var = std::max(0.0, sum2 / cfg.eval_episodes - mean * mean);
      MetricsRow row;
      row.step = t;
      row.eval_return_mean = mean;
      row.eval_return_std = std::sqrt(var);
      row.min_abs_bias = min_abs_bias(out.actor);
      row.actor_loss = last_actor_loss;
      row.critic_loss = last_critic_loss;
      out.metrics.push_back(row);
    }
    if (on_checkpoint && checkpoint_due(t))
      on_checkpoint(t, out.actor, out.critic1, out.critic2);
  }
  return out;
}

}  // namespace rlqr
