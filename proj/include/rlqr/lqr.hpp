#pragma once

#include <Eigen/Dense>

namespace rlqr {

// Continuous-time plant x' = Ax + Bu with quadratic cost integrand
// x'Qx + u'Ru.
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int action_dim() const { return static_cast<int>(B.cols()); }

  // Throws DimensionMismatch / ConfigError on inconsistent shapes, asymmetric
  // Q or R, or R not positive definite.
  void validate() const;
};

struct LQRSolution {
  Eigen::MatrixXd K;  // action_dim x state_dim, control law u = -K x
  Eigen::MatrixXd P;  // symmetric PSD value matrix, cost-to-go x'Px
};

// Solves A'P + PA - PBR^{-1}B'P + Q = 0 for the stabilizing P.
// An explicit backward sweep of the Riccati differential equation supplies
// the starting point; Newton iterations with exact Lyapunov solves finish to
// residual <= 1e-8 * (1 + |P|). Throws NonConvergent if either phase stalls.
LQRSolution solve_care(const LinearSystem& sys);

// Frobenius norm of the Riccati residual of P for this system.
double care_residual(const LinearSystem& sys, const Eigen::MatrixXd& P);

// Solves M'X + XM = -C for X (Kronecker vectorization, dense solve).
// C symmetric gives symmetric X.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& M, const Eigen::MatrixXd& C);

// Largest real part over eigenvalues of A - B K_eff. The constant control
// offset does not move the spectrum; callers judge it against their own
// tolerance. Throws DimensionMismatch on shape errors.
double closed_loop_max_real_eig(const LinearSystem& sys,
                                const Eigen::MatrixXd& K_eff,
                                const Eigen::VectorXd& u_offset);

// Cost-to-go x0'P x0 of the optimal controller from state x0.
double lqr_optimal_cost(const Eigen::MatrixXd& P, const Eigen::VectorXd& x0);

}  // namespace rlqr
