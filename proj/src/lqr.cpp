#include "rlqr/lqr.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rlqr/errors.hpp"

namespace rlqr {

void LinearSystem::validate() const {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n) throw DimensionMismatch("A must be square");
  if (B.rows() != n) throw DimensionMismatch("B row count must match A");
  if (Q.rows() != n || Q.cols() != n)
    throw DimensionMismatch("Q must be state_dim x state_dim");
  if (R.rows() != m || R.cols() != m)
    throw DimensionMismatch("R must be action_dim x action_dim");
  if (!Q.isApprox(Q.transpose(), 1e-10)) throw ConfigError("Q must be symmetric");
  if (!R.isApprox(R.transpose(), 1e-10)) throw ConfigError("R must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    throw ConfigError("R must be positive definite");
}

double care_residual(const LinearSystem& sys, const Eigen::MatrixXd& P) {
  Eigen::MatrixXd Rinv = sys.R.inverse();
  Eigen::MatrixXd res = sys.A.transpose() * P + P * sys.A -
                        P * sys.B * Rinv * sys.B.transpose() * P + sys.Q;
  return res.norm();
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& M, const Eigen::MatrixXd& C) {
  const auto n = M.rows();
  if (M.cols() != n || C.rows() != n || C.cols() != n)
    throw DimensionMismatch("lyapunov operands must be square and same size");
  // Column-major vectorization: vec(M'X + XM) = (I (x) M' + M' (x) I) vec(X).
  // Entry (i,j) of M'X picks up M(k,i) from X(k,j); entry (i,j) of XM picks
  // up M(k,j) from X(i,k).
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) {
        S(j * n + i, j * n + k) += M(k, i);
        S(j * n + i, k * n + i) += M(k, j);
      }
  Eigen::VectorXd c(Eigen::Map<const Eigen::VectorXd>(C.data(), n * n));
  Eigen::VectorXd x = S.partialPivLu().solve(-c);
  Eigen::MatrixXd X(Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n));
  return 0.5 * (X + X.transpose().eval());
}

LQRSolution solve_care(const LinearSystem& sys) {
  sys.validate();
  const auto n = sys.A.rows();
  Eigen::MatrixXd Rinv = sys.R.inverse();
  Eigen::MatrixXd BRB = sys.B * Rinv * sys.B.transpose();

  // Phase 1: integrate -dP/dt = A'P + PA - P BRB P + Q backward from P = 0
  // until stationary. Fixed step keeps this reproducible; the closed-loop
  // time constants of sensible plants sit well inside the stability bound.
  const double h = 1e-3;
  const double ode_tol = 1e-10;
  const long max_ode_iters = 20'000'000;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  bool stationary = false;
  for (long it = 0; it < max_ode_iters; ++it) {
    Eigen::MatrixXd dP =
        sys.A.transpose() * P + P * sys.A - P * BRB * P + sys.Q;
    P += h * dP;
    P = 0.5 * (P + P.transpose().eval());
    if (!P.allFinite() || P.norm() > 1e12)
      throw NonConvergent("riccati sweep diverged; plant too stiff for fixed step");
    if (dP.norm() < ode_tol) {
      stationary = true;
      break;
    }
  }
  if (!stationary)
    throw NonConvergent("riccati sweep did not reach a stationary point");

  // Phase 2: Newton polish. Each step solves the Lyapunov equation of the
  // current closed loop, which keeps the stabilizing branch.
  const double newton_tol_scale = 1e-8;
  for (int it = 0; it < 50; ++it) {
    if (care_residual(sys, P) <= newton_tol_scale * (1.0 + P.norm())) {
      LQRSolution sol;
      sol.P = 0.5 * (P + P.transpose().eval());
      sol.K = Rinv * sys.B.transpose() * sol.P;
      return sol;
    }
    Eigen::MatrixXd K = Rinv * sys.B.transpose() * P;
    Eigen::MatrixXd Acl = sys.A - sys.B * K;
    Eigen::MatrixXd C = sys.Q + K.transpose() * sys.R * K;
    P = solve_lyapunov(Acl, C);
  }
  if (care_residual(sys, P) <= newton_tol_scale * (1.0 + P.norm())) {
    LQRSolution sol;
    sol.P = 0.5 * (P + P.transpose().eval());
    sol.K = Rinv * sys.B.transpose() * sol.P;
    return sol;
  }
  throw NonConvergent("newton polish did not reach the residual tolerance");
}

double closed_loop_max_real_eig(const LinearSystem& sys,
                                const Eigen::MatrixXd& K_eff,
                                const Eigen::VectorXd& u_offset) {
  if (K_eff.rows() != sys.action_dim() || K_eff.cols() != sys.state_dim())
    throw DimensionMismatch("K_eff must be action_dim x state_dim");
  if (u_offset.size() != sys.action_dim())
    throw DimensionMismatch("u_offset must have action_dim entries");
  Eigen::MatrixXd Acl = sys.A - sys.B * K_eff;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Acl, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

double lqr_optimal_cost(const Eigen::MatrixXd& P, const Eigen::VectorXd& x0) {
  if (P.rows() != x0.size() || P.cols() != x0.size())
    throw DimensionMismatch("P and x0 sizes disagree");
  return x0.dot(P * x0);
}

}  // namespace rlqr
