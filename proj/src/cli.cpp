#include "rlqr/cli.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "rlqr/criticfit.hpp"
#include "rlqr/errors.hpp"
#include "rlqr/lastfit.hpp"
#include "rlqr/lqr.hpp"
#include "rlqr/net_io.hpp"

namespace rlqr {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed",
      "env.mass", "env.length", "env.damping", "env.torque_max", "env.dt",
      "env.gravity", "env.episode_len", "env.q_theta", "env.q_theta_dot",
      "env.r_torque", "env.exit_reward", "env.exit_theta",
      "env.exit_theta_dot", "env.exit_terminates",
      "bias.m", "bias.c_b", "bias.c_w", "bias.alpha", "bias.lambda_lin",
      "bias.lambda_k", "bias.lambda_bz", "bias.max_increments",
      "td3.steps", "td3.delay", "td3.gamma", "td3.tau", "td3.sigma_e",
      "td3.sigma_s", "td3.noise_clip", "td3.batch", "td3.actor_lr",
      "td3.critic_lr", "td3.variant", "td3.optimizer", "td3.restrict_mode",
      "td3.warmup", "td3.eval_interval", "td3.eval_episodes", "td3.capacity",
      "td3.hidden1", "td3.hidden2", "td3.dropout", "td3.critic_bias_shift",
      "td3.reset_mode", "td3.reset_range", "td3.velocity_abort",
      "td3.velocity_abort_limit", "td3.checkpoints", "td3.k_reg",
      "fit.nu_k", "fit.nu_growth", "fit.max_rounds", "fit.epsilon",
      "criticfit.nu", "criticfit.penalty_growth", "criticfit.max_outer",
      "criticfit.residual_tol", "criticfit.nsd_tol", "criticfit.maclaurin_err",
  };
  return keys;
}

std::vector<long> parse_step_list(const std::string& text) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    long v = std::strtol(item.c_str(), &end, 10);
    if (end == item.c_str() || *end != '\0' || v < 0)
      throw ConfigError("td3.checkpoints: '" + item + "' is not a step count");
    out.push_back(v);
  }
  return out;
}

std::string format_step_list(const std::vector<long>& steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(steps[i]);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ResolvedConfig resolve_config(const Config& c) {
  for (const auto& [key, value] : c.items()) {
    (void)value;
    if (!known_keys().count(key))
      throw ConfigError("unknown config key '" + key + "'");
  }
  ResolvedConfig r;
  r.env.mass = c.get_double("env.mass", r.env.mass);
  r.env.length = c.get_double("env.length", r.env.length);
  r.env.damping = c.get_double("env.damping", r.env.damping);
  r.env.torque_max = c.get_double("env.torque_max", r.env.torque_max);
  r.env.dt = c.get_double("env.dt", r.env.dt);
  r.env.gravity = c.get_double("env.gravity", r.env.gravity);
  r.env.episode_len = static_cast<int>(c.get_long("env.episode_len", r.env.episode_len));
  r.env.q_theta = c.get_double("env.q_theta", r.env.q_theta);
  r.env.q_theta_dot = c.get_double("env.q_theta_dot", r.env.q_theta_dot);
  r.env.r_torque = c.get_double("env.r_torque", r.env.r_torque);
  r.env.exit_reward = c.get_double("env.exit_reward", r.env.exit_reward);
  r.env.exit_theta = c.get_double("env.exit_theta", r.env.exit_theta);
  r.env.exit_theta_dot = c.get_double("env.exit_theta_dot", r.env.exit_theta_dot);
  r.env.exit_terminates = c.get_bool("env.exit_terminates", r.env.exit_terminates);
  r.env.validate();

  r.bias.m = c.get_double("bias.m", r.bias.m);
  r.bias.c_b = c.get_double("bias.c_b", r.bias.c_b);
  r.bias.c_w = c.get_double("bias.c_w", r.bias.c_w);
  r.bias.alpha = c.get_double("bias.alpha", r.bias.alpha);
  r.bias.lambda_lin = c.get_double("bias.lambda_lin", r.bias.lambda_lin);
  r.bias.lambda_k = c.get_double("bias.lambda_k", r.bias.lambda_k);
  r.bias.lambda_bz = c.get_double("bias.lambda_bz", r.bias.lambda_bz);
  r.bias.max_bias_increments = c.get_long("bias.max_increments", r.bias.max_bias_increments);
  r.bias.validate();

  r.td3.steps = c.get_long("td3.steps", r.td3.steps);
  r.td3.delay = static_cast<int>(c.get_long("td3.delay", r.td3.delay));
  r.td3.gamma = c.get_double("td3.gamma", r.td3.gamma);
  r.td3.tau = c.get_double("td3.tau", r.td3.tau);
  r.td3.sigma_e = c.get_double("td3.sigma_e", r.td3.eff_sigma_e(r.env.torque_max));
  r.td3.sigma_s = c.get_double("td3.sigma_s", r.td3.eff_sigma_s(r.env.torque_max));
  r.td3.noise_clip = c.get_double("td3.noise_clip", r.td3.eff_noise_clip(r.env.torque_max));
  r.td3.batch = static_cast<int>(c.get_long("td3.batch", r.td3.batch));
  r.td3.actor_lr = c.get_double("td3.actor_lr", r.td3.actor_lr);
  r.td3.critic_lr = c.get_double("td3.critic_lr", r.td3.critic_lr);
  r.td3.variant = variant_from_name(c.get_str("td3.variant", variant_name(r.td3.variant)));
  std::string opt = c.get_str("td3.optimizer", "sgd");
  if (opt == "sgd") r.td3.optimizer = OptimizerKind::Sgd;
  else if (opt == "adam") r.td3.optimizer = OptimizerKind::Adam;
  else throw ConfigError("td3.optimizer: '" + opt + "' must be sgd or adam");
  std::string rmode = c.get_str("td3.restrict_mode", "shift");
  if (rmode == "shift") r.td3.restrict_mode = BiasRestrictMode::Shift;
  else if (rmode == "revert") r.td3.restrict_mode = BiasRestrictMode::Revert;
  else throw ConfigError("td3.restrict_mode: '" + rmode + "' must be shift or revert");
  r.td3.warmup = c.get_long("td3.warmup", r.td3.warmup);
  r.td3.eval_interval = c.get_long("td3.eval_interval", r.td3.eval_interval);
  r.td3.eval_episodes = static_cast<int>(c.get_long("td3.eval_episodes", r.td3.eval_episodes));
  r.td3.capacity = static_cast<std::size_t>(c.get_long("td3.capacity", static_cast<long>(r.td3.capacity)));
  r.td3.hidden1 = static_cast<int>(c.get_long("td3.hidden1", r.td3.hidden1));
  r.td3.hidden2 = static_cast<int>(c.get_long("td3.hidden2", r.td3.hidden2));
  r.td3.dropout = c.get_double("td3.dropout", r.td3.dropout);
  r.td3.critic_bias_shift = c.get_bool("td3.critic_bias_shift", r.td3.critic_bias_shift);
  std::string reset_mode = c.get_str("td3.reset_mode", "bottom");
  if (reset_mode == "bottom") r.td3.reset_mode = ResetMode::Bottom;
  else if (reset_mode == "uniform") r.td3.reset_mode = ResetMode::Uniform;
  else throw ConfigError("td3.reset_mode: '" + reset_mode + "' must be bottom or uniform");
  r.td3.reset_range = c.get_double("td3.reset_range", r.td3.reset_range);
  r.td3.velocity_abort = c.get_bool("td3.velocity_abort", r.td3.velocity_abort);
  r.td3.velocity_abort_limit = c.get_double("td3.velocity_abort_limit", r.td3.velocity_abort_limit);
  if (c.has("td3.checkpoints"))
    r.td3.checkpoint_steps = parse_step_list(c.get_str("td3.checkpoints", ""));
  r.td3.validate();
  r.k_reg = c.get_bool("td3.k_reg", r.k_reg);

  r.fit_nu_k = c.get_double("fit.nu_k", r.fit_nu_k);
  r.fit_nu_growth = c.get_double("fit.nu_growth", r.fit_nu_growth);
  r.fit_max_rounds = static_cast<int>(c.get_long("fit.max_rounds", r.fit_max_rounds));
  r.fit_epsilon = c.get_double("fit.epsilon", r.fit_epsilon);

  r.cf_nu = c.get_double("criticfit.nu", r.cf_nu);
  r.cf_penalty_growth = c.get_double("criticfit.penalty_growth", r.cf_penalty_growth);
  r.cf_max_outer = static_cast<int>(c.get_long("criticfit.max_outer", r.cf_max_outer));
  r.cf_residual_tol = c.get_double("criticfit.residual_tol", r.cf_residual_tol);
  r.cf_nsd_tol = c.get_double("criticfit.nsd_tol", r.cf_nsd_tol);
  r.cf_maclaurin_err = c.get_double("criticfit.maclaurin_err", r.cf_maclaurin_err);

  long seed = c.get_long("seed", 0);
  if (seed < 0) throw ConfigError("seed must be nonnegative");
  r.seed = static_cast<std::uint64_t>(seed);
  if (const char* env_seed = std::getenv("RLQR_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0')
      throw ConfigError("RLQR_SEED is not an integer");
    r.seed = v;
  }
  return r;
}

Config to_config(const ResolvedConfig& r) {
  Config c;
  c.set("seed", std::to_string(r.seed));
  c.set("env.mass", fmt(r.env.mass));
  c.set("env.length", fmt(r.env.length));
  c.set("env.damping", fmt(r.env.damping));
  c.set("env.torque_max", fmt(r.env.torque_max));
  c.set("env.dt", fmt(r.env.dt));
  c.set("env.gravity", fmt(r.env.gravity));
  c.set("env.episode_len", std::to_string(r.env.episode_len));
  c.set("env.q_theta", fmt(r.env.q_theta));
  c.set("env.q_theta_dot", fmt(r.env.q_theta_dot));
  c.set("env.r_torque", fmt(r.env.r_torque));
  c.set("env.exit_reward", fmt(r.env.exit_reward));
  c.set("env.exit_theta", fmt(r.env.exit_theta));
  c.set("env.exit_theta_dot", fmt(r.env.exit_theta_dot));
  c.set("env.exit_terminates", r.env.exit_terminates ? "true" : "false");
  c.set("bias.m", fmt(r.bias.m));
  c.set("bias.c_b", fmt(r.bias.c_b));
  c.set("bias.c_w", fmt(r.bias.c_w));
  c.set("bias.alpha", fmt(r.bias.alpha));
  c.set("bias.lambda_lin", fmt(r.bias.lambda_lin));
  c.set("bias.lambda_k", fmt(r.bias.lambda_k));
  c.set("bias.lambda_bz", fmt(r.bias.lambda_bz));
  c.set("bias.max_increments", std::to_string(r.bias.max_bias_increments));
  c.set("td3.steps", std::to_string(r.td3.steps));
  c.set("td3.delay", std::to_string(r.td3.delay));
  c.set("td3.gamma", fmt(r.td3.gamma));
  c.set("td3.tau", fmt(r.td3.tau));
  c.set("td3.sigma_e", fmt(r.td3.eff_sigma_e(r.env.torque_max)));
  c.set("td3.sigma_s", fmt(r.td3.eff_sigma_s(r.env.torque_max)));
  c.set("td3.noise_clip", fmt(r.td3.eff_noise_clip(r.env.torque_max)));
  c.set("td3.batch", std::to_string(r.td3.batch));
  c.set("td3.actor_lr", fmt(r.td3.actor_lr));
  c.set("td3.critic_lr", fmt(r.td3.critic_lr));
  c.set("td3.variant", variant_name(r.td3.variant));
  c.set("td3.optimizer", r.td3.optimizer == OptimizerKind::Sgd ? "sgd" : "adam");
  c.set("td3.restrict_mode",
        r.td3.restrict_mode == BiasRestrictMode::Shift ? "shift" : "revert");
  c.set("td3.warmup", std::to_string(r.td3.warmup));
  c.set("td3.eval_interval", std::to_string(r.td3.eval_interval));
  c.set("td3.eval_episodes", std::to_string(r.td3.eval_episodes));
  c.set("td3.capacity", std::to_string(r.td3.capacity));
  c.set("td3.hidden1", std::to_string(r.td3.hidden1));
  c.set("td3.hidden2", std::to_string(r.td3.hidden2));
  c.set("td3.dropout", fmt(r.td3.dropout));
  c.set("td3.critic_bias_shift", r.td3.critic_bias_shift ? "true" : "false");
  c.set("td3.reset_mode",
        r.td3.reset_mode == ResetMode::Bottom ? "bottom" : "uniform");
  c.set("td3.reset_range", fmt(r.td3.reset_range));
  c.set("td3.velocity_abort", r.td3.velocity_abort ? "true" : "false");
  c.set("td3.velocity_abort_limit", fmt(r.td3.velocity_abort_limit));
  c.set("td3.checkpoints", format_step_list(r.td3.checkpoint_steps));
  c.set("td3.k_reg", r.k_reg ? "true" : "false");
  c.set("fit.nu_k", fmt(r.fit_nu_k));
  c.set("fit.nu_growth", fmt(r.fit_nu_growth));
  c.set("fit.max_rounds", std::to_string(r.fit_max_rounds));
  c.set("fit.epsilon", fmt(r.offset_epsilon()));
  c.set("criticfit.nu", fmt(r.cf_nu));
  c.set("criticfit.penalty_growth", fmt(r.cf_penalty_growth));
  c.set("criticfit.max_outer", std::to_string(r.cf_max_outer));
  c.set("criticfit.residual_tol", fmt(r.cf_residual_tol));
  c.set("criticfit.nsd_tol", fmt(r.cf_nsd_tol));
  c.set("criticfit.maclaurin_err", fmt(r.cf_maclaurin_err));
  return c;
}

namespace {

namespace fs = std::filesystem;

void write_manifest(const ResolvedConfig& r, const fs::path& dir,
                    const std::string& what) {
  to_config(r).write((dir / "manifest.txt").string(),
                     std::string("rlqr ") + kToolVersion + " " + what +
                         " manifest; rerun with --config to reproduce");
}

void write_metrics(const std::vector<MetricsRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << "step,eval_return_mean,eval_return_std,min_abs_bias,actor_loss,critic_loss\n";
  for (const auto& m : rows)
    out << m.step << ',' << fmt(m.eval_return_mean) << ','
        << fmt(m.eval_return_std) << ',' << fmt(m.min_abs_bias) << ','
        << fmt(m.actor_loss) << ',' << fmt(m.critic_loss) << '\n';
}

int cmd_train(const ResolvedConfig& r, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  Eigen::MatrixXd K;
  const Eigen::MatrixXd* k_target = nullptr;
  if (r.k_reg && r.td3.uses_reg_loss()) {
    K = solve_care(linearize_upright(r.env)).K;
    k_target = &K;
  }
  auto save_checkpoint = [&](long step, const NetworkParams& actor,
                             const NetworkParams& c1, const NetworkParams& c2) {
    std::string tag = std::to_string(step);
    save_network(actor, (dir / ("actor_" + tag + ".txt")).string());
    save_network(c1, (dir / ("critic1_" + tag + ".txt")).string());
    save_network(c2, (dir / ("critic2_" + tag + ".txt")).string());
  };
  TrainResult res =
      train(r.env, r.td3, r.bias, k_target, r.seed, save_checkpoint);
  save_network(res.actor, (dir / "actor_final.txt").string());
  save_network(res.critic1, (dir / "critic1_final.txt").string());
  save_network(res.critic2, (dir / "critic2_final.txt").string());
  write_metrics(res.metrics, dir / "metrics.csv");
  write_manifest(r, dir, "train");
  std::cout << "trained " << variant_name(r.td3.variant) << " for "
            << r.td3.steps << " steps; metrics rows: " << res.metrics.size()
            << '\n';
  return 0;
}

int cmd_fit(const ResolvedConfig& r, const std::string& checkpoint,
            const std::string& mode, const std::string& out_dir) {
  if (mode != "exact" && mode != "relaxed")
    throw ConfigError("--mode must be exact or relaxed");
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  NetworkParams actor = load_network(checkpoint);
  EffectiveLinearization lin = effective_linearization(actor, r.bias.m);
  LinearSystem sys = linearize_upright(r.env);
  LQRSolution sol = solve_care(sys);
  FitProblem p = make_fit_problem(actor, lin, sol.K);
  p.nu_k = r.fit_nu_k;
  p.nu_growth = r.fit_nu_growth;
  p.max_rounds = r.fit_max_rounds;
  p.epsilon = r.offset_epsilon();
  FitResult fit =
      mode == "exact" ? fit_exact(p, &sys) : fit_relaxed(p, sys);
  NetworkParams fitted = actor;
  apply_fit(fitted, fit);
  save_network(fitted, (dir / "actor_fitted.txt").string());
  std::ofstream rep(dir / "fit_report.txt");
  rep << "mode=" << mode << '\n'
      << "gain_error=" << fmt(fit.gain_error) << '\n'
      << "offset_inf_norm=" << fmt(fit.offset.lpNorm<Eigen::Infinity>()) << '\n'
      << "rounds=" << fit.rounds << '\n'
      << "nu_final=" << fmt(fit.nu_final) << '\n'
      << "max_real_eig=" << fmt(fit.max_real_eig) << '\n'
      << "stable=" << (fit.stable ? "true" : "false") << '\n'
      << "residual_to_original=" << fmt(fit.residual_to_original) << '\n'
      << "delta_w_norm=" << fmt((fit.W_o - p.W_n).norm()) << '\n'
      << "delta_b_norm=" << fmt((fit.b_o - p.b_n).norm()) << '\n';
  rep << "gain_error_history=";
  for (std::size_t i = 0; i < fit.gain_error_history.size(); ++i)
    rep << (i ? "," : "") << fmt(fit.gain_error_history[i]);
  rep << '\n';
  write_manifest(r, dir, "fit");
  std::cout << "fit mode=" << mode << " stable="
            << (fit.stable ? "true" : "false")
            << " gain_error=" << fit.gain_error
            << " max_real_eig=" << fit.max_real_eig << " rounds=" << fit.rounds
            << '\n';
  return 0;
}

int cmd_eval(const ResolvedConfig& r, const std::string& checkpoint, int trials,
             double range, double duration, const std::string& out_dir,
             bool trajectories) {
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  NetworkParams actor = load_network(checkpoint);
  PendulumParams env = r.env;
  env.exit_terminates = false;  // fixed-duration rollouts
  int steps = static_cast<int>(std::lround(duration / env.dt));
  Rng rng(Rng::derive(r.seed, streams::kEval));
  std::ofstream csv(dir / "eval.csv");
  csv << "trial,theta0,cost,final_theta,final_theta_dot,exited\n";
  double sum = 0.0, sum2 = 0.0;
  int stabilized = 0;
  for (int i = 0; i < trials; ++i) {
    PendulumState s0{rng.uniform(-range, range), 0.0};
    EvalEpisode ep = rollout(env, actor, s0, steps, /*record=*/true);
    double cost = 0.0;
    for (std::size_t k = 0; k + 1 < ep.states.size(); ++k) {
      const PendulumState& s = ep.states[k];
      double u = ep.actions[k];
      cost += (env.q_theta * s.theta * s.theta +
               env.q_theta_dot * s.theta_dot * s.theta_dot +
               env.r_torque * u * u) *
              env.dt;
    }
    const PendulumState& fin = ep.states.back();
    if (std::abs(fin.theta) < 0.05) ++stabilized;
    sum += cost;
    sum2 += cost * cost;
    csv << i << ',' << fmt(s0.theta) << ',' << fmt(cost) << ','
        << fmt(fin.theta) << ',' << fmt(fin.theta_dot) << ','
        << (ep.exited ? 1 : 0) << '\n';
    if (trajectories) {
      std::ofstream traj(dir / ("traj_" + std::to_string(i) + ".csv"));
      traj << "t,theta,theta_dot,u,reward,done\n";
      for (std::size_t k = 0; k < ep.actions.size(); ++k)
        traj << fmt(k * env.dt) << ',' << fmt(ep.states[k].theta) << ','
             << fmt(ep.states[k].theta_dot) << ',' << fmt(ep.actions[k]) << ','
             << fmt(ep.rewards[k]) << ',' << (ep.dones[k] ? 1 : 0) << '\n';
    }
  }
  std::ofstream summary(dir / "eval_summary.txt");
  if (trials > 0) {
    double mean = sum / trials;
    double var = std::max(0.0, sum2 / trials - mean * mean);
    summary << "trials=" << trials << '\n'
            << "cost_mean=" << fmt(mean) << '\n'
            << "cost_std=" << fmt(std::sqrt(var)) << '\n'
            << "stabilized=" << stabilized << '\n';
    std::cout << "eval: cost " << mean << " +- " << std::sqrt(var) << " ("
              << stabilized << "/" << trials << " stabilized)\n";
  } else {
    summary << "trials=0\n";
  }
  write_manifest(r, dir, "eval");
  return 0;
}

int cmd_heatmap(const ResolvedConfig& r, const std::string& checkpoint,
                double theta_min, double theta_max, double theta_dot_min,
                double theta_dot_max, int res_theta, int res_theta_dot,
                const std::string& out_path) {
  if (res_theta < 2 || res_theta_dot < 2)
    throw ConfigError("heatmap resolution must be at least 2");
  NetworkParams actor = load_network(checkpoint);
  LQRSolution sol = solve_care(linearize_upright(r.env));
  const double limit = r.env.torque_max;
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write '" + out_path + "'");
  std::string lqr_path = out_path;
  auto dot = lqr_path.rfind(".csv");
  if (dot != std::string::npos && dot == lqr_path.size() - 4)
    lqr_path.insert(dot, "_lqr");
  else
    lqr_path += "_lqr.csv";
  std::ofstream out_lqr(lqr_path);
  out << "theta,theta_dot,u\n";
  out_lqr << "theta,theta_dot,u\n";
  for (int i = 0; i < res_theta; ++i) {
    double th = theta_min + (theta_max - theta_min) * i / (res_theta - 1);
    for (int j = 0; j < res_theta_dot; ++j) {
      double td =
          theta_dot_min + (theta_dot_max - theta_dot_min) * j / (res_theta_dot - 1);
      Eigen::Vector2d x(th, td);
      double u = std::clamp(forward_one(actor, x)(0), -limit, limit);
      double u_lqr = std::clamp(-(sol.K * x)(0), -limit, limit);
      out << fmt(th) << ',' << fmt(td) << ',' << fmt(u) << '\n';
      out_lqr << fmt(th) << ',' << fmt(td) << ',' << fmt(u_lqr) << '\n';
    }
  }
  std::cout << "heatmap " << res_theta << "x" << res_theta_dot << " -> "
            << out_path << '\n';
  return 0;
}

int cmd_lqr(const ResolvedConfig& r) {
  LinearSystem sys = linearize_upright(r.env);
  LQRSolution sol = solve_care(sys);
  Eigen::MatrixXd Acl = sys.A - sys.B * sol.K;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Acl);
  std::cout << "A =\n" << sys.A << "\nB =\n" << sys.B << "\nK =\n" << sol.K
            << "\nP =\n" << sol.P << "\nclosed-loop eigenvalues:\n"
            << es.eigenvalues().transpose() << '\n'
            << "care residual = " << care_residual(sys, sol.P) << '\n';
  return 0;
}

void usage(std::ostream& os) {
  os << "usage: rlqr <train|fit|eval|heatmap|lqr> [options]\n"
        "  common: --config FILE, --out DIR, --KEY VALUE config overrides\n"
        "  fit:     --checkpoint FILE --mode exact|relaxed\n"
        "  eval:    --checkpoint FILE [--trials N] [--range R] [--duration S]"
        " [--trajectories]\n"
        "  heatmap: --checkpoint FILE [--theta-min V] [--theta-max V]\n"
        "           [--theta-dot-min V] [--theta-dot-max V] [--res-theta N]"
        " [--res-theta-dot N]\n"
        "  environment: RLQR_SEED overrides the seed\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  if (args.empty()) {
    usage(std::cerr);
    return 2;
  }
  const std::string& cmd = args[0];
  if (cmd == "--help" || cmd == "help") {
    usage(std::cout);
    return 0;
  }
  if (cmd != "train" && cmd != "fit" && cmd != "eval" && cmd != "heatmap" &&
      cmd != "lqr") {
    std::cerr << "unknown command '" << cmd << "'\n";
    usage(std::cerr);
    return 2;
  }
  try {
    Config cfg;
    std::string out_dir = "out";
    std::string checkpoint;
    std::string mode = "relaxed";
    int trials = 10;
    double range = 0.4;
    double duration = 5.0;
    bool trajectories = false;
    double theta_min = -M_PI, theta_max = M_PI;
    double theta_dot_min = -8.0, theta_dot_max = 8.0;
    int res_theta = 101, res_theta_dot = 101;
    std::string heatmap_out;

    std::vector<std::pair<std::string, std::string>> overrides;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a.rfind("--", 0) != 0) {
        std::cerr << "unexpected argument '" << a << "'\n";
        return 2;
      }
      std::string key = a.substr(2);
      if (key == "trajectories") {
        trajectories = true;
        continue;
      }
      if (i + 1 >= args.size()) {
        std::cerr << "flag --" << key << " needs a value\n";
        return 2;
      }
      std::string value = args[++i];
      if (key == "config") {
        cfg = Config::from_file(value);
      } else if (key == "out") {
        out_dir = value;
      } else if (key == "checkpoint") {
        checkpoint = value;
      } else if (key == "mode") {
        mode = value;
      } else if (key == "trials") {
        trials = std::stoi(value);
      } else if (key == "range") {
        range = std::stod(value);
      } else if (key == "duration") {
        duration = std::stod(value);
      } else if (key == "theta-min") {
        theta_min = std::stod(value);
      } else if (key == "theta-max") {
        theta_max = std::stod(value);
      } else if (key == "theta-dot-min") {
        theta_dot_min = std::stod(value);
      } else if (key == "theta-dot-max") {
        theta_dot_max = std::stod(value);
      } else if (key == "res-theta") {
        res_theta = std::stoi(value);
      } else if (key == "res-theta-dot") {
        res_theta_dot = std::stoi(value);
      } else {
        overrides.emplace_back(key, value);
      }
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    ResolvedConfig r = resolve_config(cfg);

    if (cmd == "train") return cmd_train(r, out_dir);
    if (cmd == "lqr") return cmd_lqr(r);
    if (checkpoint.empty()) {
      std::cerr << cmd << " needs --checkpoint\n";
      return 2;
    }
    if (cmd == "fit") return cmd_fit(r, checkpoint, mode, out_dir);
    if (cmd == "eval")
      return cmd_eval(r, checkpoint, trials, range, duration, out_dir,
                      trajectories);
    if (heatmap_out.empty())
      heatmap_out = (fs::path(out_dir) / "heatmap.csv").string();
    fs::create_directories(fs::path(heatmap_out).parent_path());
    return cmd_heatmap(r, checkpoint, theta_min, theta_max, theta_dot_min,
                       theta_dot_max, res_theta, res_theta_dot, heatmap_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rlqr
