#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "rlqr/biasshift.hpp"
#include "rlqr/cli.hpp"
#include "rlqr/criticfit.hpp"
#include "rlqr/env.hpp"
#include "rlqr/errors.hpp"
#include "rlqr/lqr.hpp"
#include "rlqr/net.hpp"
#include "rlqr/net_io.hpp"
#include "rlqr/rng.hpp"
#include "rlqr/td3.hpp"

namespace py = pybind11;
using namespace rlqr;

namespace {

std::vector<NetSpecLayer> spec_from_list(
    const std::vector<std::pair<int, std::string>>& layers) {
  std::vector<NetSpecLayer> spec;
  spec.reserve(layers.size());
  for (const auto& [width, act] : layers)
    spec.push_back({width, activation_from_name(act)});
  return spec;
}

PendulumParams params_from_kwargs(const py::kwargs& kw) {
  PendulumParams p;
  for (auto item : kw) {
    const std::string key = py::cast<std::string>(item.first);
    if (key == "mass") p.mass = py::cast<double>(item.second);
    else if (key == "length") p.length = py::cast<double>(item.second);
    else if (key == "damping") p.damping = py::cast<double>(item.second);
    else if (key == "torque_max") p.torque_max = py::cast<double>(item.second);
    else if (key == "dt") p.dt = py::cast<double>(item.second);
    else if (key == "gravity") p.gravity = py::cast<double>(item.second);
    else if (key == "episode_len") p.episode_len = py::cast<int>(item.second);
    else if (key == "q_theta") p.q_theta = py::cast<double>(item.second);
    else if (key == "q_theta_dot") p.q_theta_dot = py::cast<double>(item.second);
    else if (key == "r_torque") p.r_torque = py::cast<double>(item.second);
    else if (key == "exit_reward") p.exit_reward = py::cast<double>(item.second);
    else if (key == "exit_theta") p.exit_theta = py::cast<double>(item.second);
    else if (key == "exit_theta_dot") p.exit_theta_dot = py::cast<double>(item.second);
    else if (key == "exit_terminates") p.exit_terminates = py::cast<bool>(item.second);
    else throw ConfigError("unknown pendulum parameter '" + key + "'");
  }
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "feedforward policies with a provable linear region, LQR tools, "
            "and the pendulum training pipeline";

  py::register_exception<DimensionMismatch>(m, "DimensionMismatch",
                                            PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NonConvergent>(m, "NonConvergent", PyExc_RuntimeError);
  py::register_exception<Infeasible>(m, "Infeasible", PyExc_RuntimeError);
  py::register_exception<Unstabilizable>(m, "Unstabilizable",
                                         PyExc_RuntimeError);
  py::register_exception<InitFailure>(m, "InitFailure", PyExc_RuntimeError);

  py::class_<NetworkParams>(m, "Network")
      .def_property_readonly("input_dim", &NetworkParams::input_dim)
      .def_property_readonly("output_dim", &NetworkParams::output_dim)
      .def_property_readonly("num_layers", &NetworkParams::num_layers)
      .def_property_readonly(
          "output_scale",
          [](const NetworkParams& n) { return n.output_scale; })
      .def("weights",
           [](const NetworkParams& n, int l) {
             return n.layers.at(static_cast<std::size_t>(l)).W;
           },
           py::arg("layer"))
      .def("biases",
           [](const NetworkParams& n, int l) {
             return n.layers.at(static_cast<std::size_t>(l)).b;
           },
           py::arg("layer"))
      .def("activation",
           [](const NetworkParams& n, int l) {
             return activation_name(n.layers.at(static_cast<std::size_t>(l)).act);
           },
           py::arg("layer"))
      .def("forward",
           [](const NetworkParams& n, const Eigen::VectorXd& x) {
             return forward_one(n, x);
           },
           py::arg("x"))
      .def("forward_batch",
           [](const NetworkParams& n, const Eigen::MatrixXd& X) {
             return forward(n, X);
           },
           py::arg("X"), "Rows are samples.")
      .def("effective_linearization",
           [](const NetworkParams& n, double region_size, int depth) {
             EffectiveLinearization lin =
                 effective_linearization(n, region_size, depth);
             return py::make_tuple(lin.W_eff, lin.b_eff);
           },
           py::arg("region_size"), py::arg("depth") = -1,
           "Gain and offset of the final pre-activation over the retained "
           "region.")
      .def("in_linear_region",
           [](const NetworkParams& n, const Eigen::VectorXd& x,
              double region_size) {
             EffectiveLinearization lin =
                 effective_linearization(n, region_size);
             return in_linear_region(lin, x);
           },
           py::arg("x"), py::arg("region_size"))
      .def("min_abs_bias",
           [](const NetworkParams& n) { return min_abs_bias(n); })
      .def("save",
           [](const NetworkParams& n, const std::string& path) {
             save_network(n, path);
           },
           py::arg("path"))
      .def_static("load",
                  [](const std::string& path) { return load_network(path); },
                  py::arg("path"));

  m.def(
      "init_network",
      [](int input_dim, const std::vector<std::pair<int, std::string>>& layers,
         double output_scale, std::uint64_t seed) {
        Rng rng(seed);
        return init_network(input_dim, spec_from_list(layers), output_scale,
                            rng);
      },
      py::arg("input_dim"), py::arg("layers"), py::arg("output_scale"),
      py::arg("seed"),
      "Uniform fan-in init; layers is a list of (width, activation) pairs.");

  m.def(
      "init_bias_shifted",
      [](int input_dim, const std::vector<std::pair<int, std::string>>& layers,
         double output_scale, std::uint64_t seed, double m_, double c_b,
         double c_w, long max_bias_increments) {
        Rng rng(seed);
        NetworkParams net =
            init_network(input_dim, spec_from_list(layers), output_scale, rng);
        BiasShiftConfig cfg;
        cfg.m = m_;
        cfg.c_b = c_b;
        cfg.c_w = c_w;
        cfg.max_bias_increments = max_bias_increments;
        cfg.validate();
        initialize_biases(net, cfg, rng);
        return net;
      },
      py::arg("input_dim"), py::arg("layers"), py::arg("output_scale"),
      py::arg("seed"), py::arg("m") = 0.2, py::arg("c_b") = 2.0,
      py::arg("c_w") = 0.1, py::arg("max_bias_increments") = 10000,
      "Fan-in init followed by the bias scheme that keeps every hidden unit "
      "saturated-sign-stable on a region of half width m around the origin.");

  m.def(
      "lqr",
      [](const py::kwargs& kw) {
        PendulumParams p = params_from_kwargs(kw);
        LinearSystem sys = linearize_upright(p);
        LQRSolution sol = solve_care(sys);
        Eigen::VectorXd no_offset = Eigen::VectorXd::Zero(sys.B.cols());
        py::dict out;
        out["K"] = sol.K;
        out["P"] = sol.P;
        out["closed_loop_eig"] =
            closed_loop_max_real_eig(sys, sol.K, no_offset);
        out["residual"] = care_residual(sys, sol.P);
        out["A"] = sys.A;
        out["B"] = sys.B;
        return out;
      },
      "Upright-linearized pendulum LQR; keyword overrides for the physical "
      "parameters.");

  m.def(
      "rollout",
      [](const NetworkParams& actor, double theta, double theta_dot,
         int max_steps, const py::kwargs& kw) {
        PendulumParams p = params_from_kwargs(kw);
        PendulumState start{theta, theta_dot};
        EvalEpisode ep = rollout(p, actor, start, max_steps, true);
        const auto n = static_cast<Eigen::Index>(ep.actions.size());
        Eigen::MatrixXd states(ep.states.size(), 2);
        for (std::size_t i = 0; i < ep.states.size(); ++i) {
          states(static_cast<Eigen::Index>(i), 0) = ep.states[i].theta;
          states(static_cast<Eigen::Index>(i), 1) = ep.states[i].theta_dot;
        }
        Eigen::VectorXd actions(n), rewards(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          actions(i) = ep.actions[static_cast<std::size_t>(i)];
          rewards(i) = ep.rewards[static_cast<std::size_t>(i)];
        }
        py::dict out;
        out["return"] = ep.ret;
        out["states"] = states;
        out["actions"] = actions;
        out["rewards"] = rewards;
        out["exited"] = ep.exited;
        return out;
      },
      py::arg("actor"), py::arg("theta"), py::arg("theta_dot"),
      py::arg("max_steps"),
      "Noise-free closed-loop rollout; rows of 'states' are (theta, "
      "theta_dot) including the start state.");

  m.def(
      "fit_critic_last_layer",
      [](const NetworkParams& critic, double region_size,
         const Eigen::MatrixXd& P, const Eigen::MatrixXd& K, double rho_exit,
         double nu) {
        AffineMap into = swish_layer_map(critic, region_size);
        CriticFitProblem prob;
        prob.W_hat = into.W;
        prob.b_hat = into.b;
        prob.W_d = critic.layers.back().W.row(0);
        prob.b_d = critic.layers.back().b(0);
        prob.P = P;
        prob.K = K;
        prob.rho_exit = rho_exit;
        prob.nu = nu;
        prob.state_dim = static_cast<int>(P.rows());
        prob.action_dim = static_cast<int>(K.rows());
        CriticFitResult r = fit_critic_last_layer(prob);
        py::dict out;
        out["W_o"] = Eigen::RowVectorXd(r.W_o);
        out["b_o"] = r.b_o;
        out["max_block_eig"] = r.report.max_block_eig;
        out["res_cost_match"] = r.report.res_cost_match;
        out["res_linear"] = r.report.res_linear;
        out["res_bias"] = r.report.res_bias;
        out["objective"] = r.report.objective;
        out["outer_iters"] = r.report.outer_iters;
        out["feasible"] = r.report.feasible;
        return out;
      },
      py::arg("critic"), py::arg("region_size"), py::arg("P"), py::arg("K"),
      py::arg("rho_exit") = 1000.0, py::arg("nu") = 1.0,
      "Refit the last layer of a critic whose middle layer is Swish so its "
      "quadratic surrogate matches the LQR value surface.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) { return run_cli(args); },
      py::arg("args"),
      "Run the command line tool in-process; returns the exit code.");

  m.attr("tool_version") = kToolVersion;
}
