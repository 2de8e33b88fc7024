#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rlqr/lqr.hpp"
#include "rlqr/net.hpp"

namespace rlqr {

// Inputs of the last-layer fit. W_prev/b_prev are the masked map into the
// last layer (EffectiveLinearization::into_last); W_n/b_n are the layer's
// current parameters; K is the target gain for u = -Kx.
struct FitProblem {
  Eigen::MatrixXd W_prev;  // hidden x state
  Eigen::VectorXd b_prev;  // hidden
  Eigen::MatrixXd W_n;     // action x hidden
  Eigen::VectorXd b_n;     // action
  Eigen::MatrixXd K;       // action x state

  double nu_k = 1.0;       // initial gain-penalty weight (relaxed mode)
  double nu_growth = 10.0;
  int max_rounds = 20;
  double epsilon = 8e-7;   // offset tolerance, default 1e-6 * torque_max

  void validate() const;  // throws DimensionMismatch / ConfigError
};

struct FitResult {
  Eigen::MatrixXd W_o;
  Eigen::VectorXd b_o;
  double residual_to_original = 0.0;  // sqrt(|W_o-W_n|_F^2 + |b_o-b_n|^2)
  double gain_error = 0.0;            // |W_o W_prev + K|_F
  Eigen::VectorXd offset;             // W_o b_prev + b_o
  int rounds = 0;
  bool stable = false;
  double nu_final = 0.0;
  double max_real_eig = 0.0;  // NaN when no plant was supplied
  std::vector<double> gain_error_history;  // one entry per relaxation round
};

// Minimizes |W_o - W_n|^2 + |b_o - b_n|^2 subject to W_o W_prev = -K and
// W_o b_prev + b_o = 0, row by row through the KKT system. When sys is given
// the closed-loop spectrum is evaluated and `stable` filled in. Throws
// Infeasible when rank(W_prev) < state_dim.
FitResult fit_exact(const FitProblem& p, const LinearSystem* sys = nullptr);

// Penalized form: the gain constraint becomes a cost nu_k * |W_o W_prev + K|^2
// and the offset is eliminated by b_o = -W_o b_prev. nu_k grows by nu_growth
// until the closed loop A - B (-W_o W_prev) is stable; throws Unstabilizable
// (carrying the last gain_error) when max_rounds runs out.
FitResult fit_relaxed(const FitProblem& p, const LinearSystem& sys);

// Builds the fit inputs from an actor and its linearization.
FitProblem make_fit_problem(const NetworkParams& actor,
                            const EffectiveLinearization& lin,
                            const Eigen::MatrixXd& K);

// Replaces the actor's last layer with the fitted parameters. Hidden layers
// are untouched. Throws DimensionMismatch on shape disagreement.
void apply_fit(NetworkParams& actor, const FitResult& r);

}  // namespace rlqr
