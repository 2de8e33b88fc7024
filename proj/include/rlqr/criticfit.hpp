#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rlqr/net.hpp"

namespace rlqr {

// Quadratic value surface over z = [x; u]: value = z' [[A_o,B_o],[C_o,D_o]] z.
struct QuadraticForm {
  Eigen::MatrixXd A_o;  // state x state
  Eigen::MatrixXd B_o;  // state x action
  Eigen::MatrixXd C_o;  // action x state
  Eigen::MatrixXd D_o;  // action x action

  Eigen::MatrixXd assembled() const;
};

struct CriticFitProblem {
  Eigen::MatrixXd W_hat;  // hidden x (state + action), map into the Swish layer
  Eigen::VectorXd b_hat;  // hidden
  Eigen::RowVectorXd W_d;  // desired (current) last-layer weights
  double b_d = 0.0;        // desired last-layer bias
  Eigen::MatrixXd P;       // LQR cost matrix
  Eigen::MatrixXd K;       // LQR gain
  double rho_exit = 1000.0;
  double nu = 1.0;         // weight pushing sum(W_o) negative (concavity)
  int state_dim = 0;
  int action_dim = 0;

  // Penalty-solver controls.
  double penalty_init = 1.0;
  double penalty_growth = 10.0;
  int max_outer = 50;
  double residual_tol = 1e-6;
  double nsd_tol = 1e-10;

  void validate() const;
};

struct CriticFitReport {
  double res_cost_match = 0.0;   // quadratic surface vs -P along u = -Kx
  double res_block_match = 0.0;  // block assembly consistency (0 by construction)
  double res_bias = 0.0;         // constant term vs rho_exit
  double res_linear = 0.0;       // linear term vs 0
  double max_block_eig = 0.0;
  double objective = 0.0;
  int outer_iters = 0;
  bool feasible = false;
  std::vector<double> penalty_trajectory;
};

struct CriticFitResult {
  Eigen::RowVectorXd W_o;
  double b_o = 0.0;
  QuadraticForm form;
  CriticFitReport report;
};

// Maclaurin surrogate of swish: x^2/4 + x/2.
double swish_quadratic(double x);

// Largest |z| at which |swish(z) - swish_quadratic(z)| stays within err_bound,
// found by bisection on the even error envelope.
double maclaurin_halfwidth(double err_bound);

// Value of the Maclaurin-model critic at x_hat.
double quadratic_forward(const Eigen::MatrixXd& W_hat, const Eigen::VectorXd& b_hat,
                         const Eigen::RowVectorXd& W_o, double b_o,
                         const Eigen::VectorXd& x_hat);

// Fits (W_o, b_o) so the Maclaurin-model critic equals -x'Px + rho_exit along
// u = -Kx, has no linear term, and assembles to a negative semidefinite block,
// while staying near (W_d, b_d). Equality constraints are met through KKT
// solves; the semidefiniteness constraint through growing quadratic penalties
// against the nearest negative semidefinite block. Throws Infeasible when the
// tolerances cannot be met within max_outer iterations.
CriticFitResult fit_critic_last_layer(const CriticFitProblem& p);

// Masked map into the Swish layer of a critic shaped [relu..., swish, out].
// Thin wrapper over effective_linearization at depth = swish layer index.
AffineMap swish_layer_map(const NetworkParams& critic, double region_size);

}  // namespace rlqr
