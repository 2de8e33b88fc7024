#include "rlqr/lastfit.hpp"

#include <cmath>
#include <limits>

#include "rlqr/errors.hpp"

namespace rlqr {

void FitProblem::validate() const {
  const auto h = W_prev.rows();
  const auto s = W_prev.cols();
  const auto a = W_n.rows();
  if (b_prev.size() != h) throw DimensionMismatch("b_prev length must match W_prev rows");
  if (W_n.cols() != h) throw DimensionMismatch("W_n columns must match W_prev rows");
  if (b_n.size() != a) throw DimensionMismatch("b_n length must match W_n rows");
  if (K.rows() != a || K.cols() != s)
    throw DimensionMismatch("K must be action_dim x state_dim");
  if (nu_k <= 0.0 || nu_growth <= 1.0) throw ConfigError("nu_k > 0 and nu_growth > 1 required");
  if (max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
  if (epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
}

namespace {

void finish_result(const FitProblem& p, const LinearSystem* sys, FitResult& r) {
  r.residual_to_original = std::sqrt((r.W_o - p.W_n).squaredNorm() +
                                     (r.b_o - p.b_n).squaredNorm());
  r.gain_error = (r.W_o * p.W_prev + p.K).norm();
  r.offset = r.W_o * p.b_prev + r.b_o;
  if (sys) {
    Eigen::MatrixXd K_eff = -(r.W_o * p.W_prev);
    r.max_real_eig = closed_loop_max_real_eig(*sys, K_eff, r.offset);
    r.stable = r.max_real_eig < 0.0 && r.offset.lpNorm<Eigen::Infinity>() <= p.epsilon;
  } else {
    r.max_real_eig = std::numeric_limits<double>::quiet_NaN();
    r.stable = false;
  }
}

}  // namespace

FitResult fit_exact(const FitProblem& p, const LinearSystem* sys) {
  p.validate();
  const auto h = p.W_prev.rows();
  const auto s = p.W_prev.cols();
  const auto a = p.W_n.rows();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.W_prev);
  double sv_tol = 1e-10 * svd.singularValues()(0);
  if (svd.singularValues().minCoeff() <= sv_tol)
    throw Infeasible("previous-layer map is rank deficient; the region cannot express the gain");

  // Row i solves: min |w - wn_i|^2 + (w'b_prev + bn_i)^2  s.t.  W_prev' w = -K_i'.
  // The offset constraint is eliminated through b_o = -W_o b_prev, which folds
  // the b_o objective term into the row problem.
  Eigen::MatrixXd KKT = Eigen::MatrixXd::Zero(h + s, h + s);
  KKT.topLeftCorner(h, h) =
      2.0 * (Eigen::MatrixXd::Identity(h, h) + p.b_prev * p.b_prev.transpose());
  KKT.topRightCorner(h, s) = p.W_prev;
  KKT.bottomLeftCorner(s, h) = p.W_prev.transpose();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(KKT);

  FitResult r;
  r.W_o.resize(a, h);
  r.b_o.resize(a);
  for (Eigen::Index i = 0; i < a; ++i) {
    Eigen::VectorXd rhs(h + s);
    rhs.head(h) = 2.0 * (p.W_n.row(i).transpose() - p.b_n(i) * p.b_prev);
    rhs.tail(s) = -p.K.row(i).transpose();
    Eigen::VectorXd sol = lu.solve(rhs);
    // One refinement pass keeps the KKT residual at roundoff level.
    sol += lu.solve(rhs - KKT * sol);
    r.W_o.row(i) = sol.head(h).transpose();
  }
  r.b_o = -(r.W_o * p.b_prev);
  r.rounds = 1;
  r.nu_final = std::numeric_limits<double>::infinity();
  finish_result(p, sys, r);
  return r;
}

FitResult fit_relaxed(const FitProblem& p, const LinearSystem& sys) {
  p.validate();
  const auto h = p.W_prev.rows();
  const auto a = p.W_n.rows();

  double nu = p.nu_k;
  FitResult r;
  for (int round = 1; round <= p.max_rounds; ++round) {
    // Row i minimizes |w - wn_i|^2 + (w'b_prev + bn_i)^2 + nu |W_prev'w + K_i'|^2.
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(h, h) +
                        p.b_prev * p.b_prev.transpose() +
                        nu * (p.W_prev * p.W_prev.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
      M.diagonal().array() += 1e-12;
      llt.compute(M);
      if (llt.info() != Eigen::Success)
        throw NonConvergent("gram matrix factorization failed");
    }
    r.W_o.resize(a, h);
    for (Eigen::Index i = 0; i < a; ++i) {
      Eigen::VectorXd rhs = p.W_n.row(i).transpose() - p.b_n(i) * p.b_prev -
                            nu * (p.W_prev * p.K.row(i).transpose());
      r.W_o.row(i) = llt.solve(rhs).transpose();
    }
    r.b_o = -(r.W_o * p.b_prev);
    r.rounds = round;
    r.nu_final = nu;
    finish_result(p, &sys, r);
    r.gain_error_history.push_back(r.gain_error);
    if (r.stable) return r;
    nu *= p.nu_growth;
  }
  throw Unstabilizable("no stabilizing gain within the round budget", r.gain_error);
}

FitProblem make_fit_problem(const NetworkParams& actor,
                            const EffectiveLinearization& lin,
                            const Eigen::MatrixXd& K) {
  FitProblem p;
  p.W_prev = lin.into_last.W;
  p.b_prev = lin.into_last.b;
  p.W_n = actor.layers.back().W;
  p.b_n = actor.layers.back().b;
  p.K = K;
  p.validate();
  return p;
}

void apply_fit(NetworkParams& actor, const FitResult& r) {
  Layer& last = actor.layers.back();
  if (last.W.rows() != r.W_o.rows() || last.W.cols() != r.W_o.cols() ||
      last.b.size() != r.b_o.size())
    throw DimensionMismatch("fit result does not match the actor's last layer");
  last.W = r.W_o;
  last.b = r.b_o;
}

}  // namespace rlqr
