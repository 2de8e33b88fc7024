#include "rlqr/criticfit.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "rlqr/errors.hpp"

namespace rlqr {

Eigen::MatrixXd QuadraticForm::assembled() const {
  const auto s = A_o.rows();
  const auto a = D_o.rows();
  Eigen::MatrixXd M(s + a, s + a);
  M.topLeftCorner(s, s) = A_o;
  M.topRightCorner(s, a) = B_o;
  M.bottomLeftCorner(a, s) = C_o;
  M.bottomRightCorner(a, a) = D_o;
  return M;
}

void CriticFitProblem::validate() const {
  const auto h = W_hat.rows();
  const auto d = W_hat.cols();
  if (state_dim <= 0 || action_dim <= 0 || state_dim + action_dim != d)
    throw DimensionMismatch("W_hat columns must equal state_dim + action_dim");
  if (b_hat.size() != h) throw DimensionMismatch("b_hat length must match W_hat rows");
  if (W_d.size() != h) throw DimensionMismatch("W_d length must match W_hat rows");
  if (P.rows() != state_dim || P.cols() != state_dim)
    throw DimensionMismatch("P must be state_dim square");
  if (K.rows() != action_dim || K.cols() != state_dim)
    throw DimensionMismatch("K must be action_dim x state_dim");
  if (penalty_init <= 0 || penalty_growth <= 1 || max_outer < 1)
    throw ConfigError("penalty schedule must grow from a positive start");
  if (residual_tol <= 0 || nsd_tol <= 0) throw ConfigError("tolerances must be positive");
}

double swish_quadratic(double x) { return 0.25 * x * x + 0.5 * x; }

double maclaurin_halfwidth(double err_bound) {
  if (err_bound <= 0.0) throw ConfigError("error bound must be positive");
  auto err = [](double z) { return std::abs(swish(z) - swish_quadratic(z)); };
  double lo = 0.0, hi = 1.0;
  while (err(hi) < err_bound && hi < 1e6) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (err(mid) < err_bound ? lo : hi) = mid;
  }
  return lo;
}

double quadratic_forward(const Eigen::MatrixXd& W_hat, const Eigen::VectorXd& b_hat,
                         const Eigen::RowVectorXd& W_o, double b_o,
                         const Eigen::VectorXd& x_hat) {
  if (x_hat.size() != W_hat.cols() || b_hat.size() != W_hat.rows() ||
      W_o.size() != W_hat.rows())
    throw DimensionMismatch("quadratic_forward shapes disagree");
  Eigen::VectorXd z = W_hat * x_hat + b_hat;
  Eigen::VectorXd q = 0.25 * z.cwiseProduct(z) + 0.5 * z;
  return W_o * q + b_o;
}

namespace {

// Assembles the Maclaurin-model block matrix for last-layer weights w.
Eigen::MatrixXd model_block(const Eigen::MatrixXd& W_hat, const Eigen::VectorXd& w) {
  const auto d = W_hat.cols();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < W_hat.rows(); ++i)
    M += (0.25 * w(i)) * (W_hat.row(i).transpose() * W_hat.row(i));
  return M;
}

}  // namespace

CriticFitResult fit_critic_last_layer(const CriticFitProblem& p) {
  p.validate();
  const auto h = p.W_hat.rows();
  const auto s = p.state_dim;
  const auto d = p.W_hat.cols();
  const Eigen::Index n = h + 1;  // unknowns: W_o rows then b_o

  // Equality rows. Along u = -Kx the unit contributions collapse onto
  // g_i = (p_i - K'q_i)/2, giving sum_i W_oi g_i g_i' = -P entrywise.
  const Eigen::Index m_eq = s * (s + 1) / 2 + d + 1;
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m_eq, n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m_eq);
  Eigen::MatrixXd G(h, s);  // row i holds g_i
  for (Eigen::Index i = 0; i < h; ++i) {
    Eigen::VectorXd pi = p.W_hat.row(i).head(s).transpose();
    Eigen::VectorXd qi = p.W_hat.row(i).tail(d - s).transpose();
    G.row(i) = 0.5 * (pi - p.K.transpose() * qi).transpose();
  }
  Eigen::Index row = 0;
  for (Eigen::Index r = 0; r < s; ++r)
    for (Eigen::Index c = r; c < s; ++c, ++row) {
      for (Eigen::Index i = 0; i < h; ++i) E(row, i) = G(i, r) * G(i, c);
      e(row) = -p.P(r, c);
    }
  for (Eigen::Index j = 0; j < d; ++j, ++row) {
    for (Eigen::Index i = 0; i < h; ++i)
      E(row, i) = 0.5 * (1.0 + p.b_hat(i)) * p.W_hat(i, j);
    e(row) = 0.0;
  }
  for (Eigen::Index i = 0; i < h; ++i)
    E(row, i) = 0.25 * p.b_hat(i) * p.b_hat(i) + 0.5 * p.b_hat(i);
  E(row, h) = 1.0;
  e(row) = p.rho_exit;

  // Objective Hessian and linear term: 0.5|W_o - W_d|^2 + 0.5(b_o - b_d)^2
  // + 0.5(nu + sum W_o)^2.
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  H.topLeftCorner(h, h) += Eigen::MatrixXd::Ones(h, h);
  Eigen::VectorXd c0(n);
  c0.head(h) = p.W_d.transpose() - Eigen::VectorXd::Constant(h, p.nu);
  c0(h) = p.b_d;

  // Gram matrix of the per-unit blocks S_i = w_i w_i'/4 for the penalty term.
  Eigen::MatrixXd Gram(h, h);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < h; ++j) {
      double dot = p.W_hat.row(i).dot(p.W_hat.row(j));
      Gram(i, j) = dot * dot / 16.0;
    }

  // The KKT matrix splits into a mu-independent part and the penalty block,
  // so each penalty level is factored once and reused while the projection
  // target converges at that level.
  Eigen::MatrixXd A0 = Eigen::MatrixXd::Zero(n + m_eq, n + m_eq);
  A0.topLeftCorner(n, n) = H;
  A0.topRightCorner(n, m_eq) = E.transpose();
  A0.bottomLeftCorner(m_eq, n) = E;
  Eigen::VectorXd rhs0(n + m_eq);
  rhs0.head(n) = c0;
  rhs0.tail(m_eq) = e;

  // Honest feasibility gate: the KKT matrix is singular exactly when the
  // equality rows are dependent, since the quadratic part is positive
  // definite. Checked once on E, whose entries are all comparable in size,
  // so the pivot-threshold rank decision is trustworthy here.
  {
    Eigen::FullPivLU<Eigen::MatrixXd> elu(E);
    if (elu.rank() < m_eq)
      throw Infeasible("constraint system is rank deficient for this layer");
  }

  struct KktFactor {
    Eigen::VectorXd scale;
    Eigen::MatrixXd As;
    Eigen::FullPivLU<Eigen::MatrixXd> lu;
  };
  // The penalty block outweighs the constraint rows by many orders of
  // magnitude once mu has grown, which would cost precision and defeat any
  // pivot-based singularity test. Symmetric equilibration keeps the scales
  // comparable; solve quality is then judged by the refined residual rather
  // than by pivot magnitudes.
  auto factor_kkt = [&](double mu) {
    KktFactor f;
    Eigen::MatrixXd A = A0;
    A.topLeftCorner(h, h) += mu * Gram;
    f.scale.resize(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double m = A.row(i).cwiseAbs().maxCoeff();
      f.scale(i) = m > 0 ? 1.0 / std::sqrt(m) : 1.0;
    }
    f.As = f.scale.asDiagonal() * A * f.scale.asDiagonal();
    f.lu.compute(f.As);
    return f;
  };
  auto solve_kkt = [&](const KktFactor& f, double mu, const Eigen::VectorXd& t) {
    Eigen::VectorXd rhs = rhs0;
    rhs.head(h) += mu * t;
    Eigen::VectorXd rs = f.scale.asDiagonal() * rhs;
    Eigen::VectorXd y = f.lu.solve(rs);
    for (int refine = 0; refine < 2; ++refine) y += f.lu.solve(rs - f.As * y);
    double resid = (rs - f.As * y).lpNorm<Eigen::Infinity>();
    double scale_ref =
        std::max(1.0, std::max(rs.lpNorm<Eigen::Infinity>(),
                               y.lpNorm<Eigen::Infinity>()));
    if (!y.allFinite() || resid > 1e-6 * scale_ref)
      throw NonConvergent("penalty system solve lost accuracy");
    Eigen::VectorXd sol = f.scale.asDiagonal() * y;
    return Eigen::VectorXd(sol.head(n));
  };

  CriticFitResult out;
  Eigen::VectorXd v =
      solve_kkt(factor_kkt(0.0), 0.0, Eigen::VectorXd::Zero(h));
  auto block_max_eig = [&](const Eigen::VectorXd& w) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        model_block(p.W_hat, w));
    return es.eigenvalues().maxCoeff();
  };
  double max_eig = block_max_eig(v.head(h));
  double mu = p.penalty_init;
  int iters = 0;
  const char* trace_env = std::getenv("RLQR_CF_TRACE");
  const int trace_lvl = trace_env ? trace_env[0] - '0' : 0;
  // Outer loop: method of multipliers on the semidefiniteness constraint.
  // The multiplier matrix accumulates the positive part of the shifted
  // block, so the weight mu can stay bounded; growing mu without a
  // multiplier needs weights far past what double precision tolerates
  // whenever the cone touches the equality manifold tangentially. The
  // weight only grows when a round fails to cut the violation enough.
  // Inner loop: repeated projection of the shifted block onto the negative
  // semidefinite cone, each pass a descent step on the round's objective.
  const double mu_cap = 1e12;
  Eigen::MatrixXd Lam = Eigen::MatrixXd::Zero(d, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  double prev_gap = std::numeric_limits<double>::infinity();
  while (max_eig > p.nsd_tol && iters < p.max_outer) {
    ++iters;
    KktFactor f = factor_kkt(mu);
    for (int inner = 0; inner < 400; ++inner) {
      Eigen::MatrixXd X = model_block(p.W_hat, v.head(h)) + Lam / mu;
      eig.compute(X);
      Eigen::VectorXd lam_neg = eig.eigenvalues().cwiseMin(0.0);
      Eigen::MatrixXd T = eig.eigenvectors() * lam_neg.asDiagonal() *
                              eig.eigenvectors().transpose() -
                          Lam / mu;
      Eigen::VectorXd t(h);
      for (Eigen::Index i = 0; i < h; ++i)
        t(i) = 0.25 * p.W_hat.row(i) * T * p.W_hat.row(i).transpose();
      Eigen::VectorXd v_next = solve_kkt(f, mu, t);
      double step = (v_next - v).lpNorm<Eigen::Infinity>();
      v = v_next;
      max_eig = block_max_eig(v.head(h));
      if (trace_lvl >= 2)
        std::fprintf(stderr, "  inner %d step %.3e max_eig %.6e\n", inner,
                     step, max_eig);
      if (max_eig <= p.nsd_tol) break;
      if (step <= 1e-12 * std::max(1.0, v.lpNorm<Eigen::Infinity>())) break;
    }
    // Multiplier update: keep the positive part of the shifted block.
    {
      Eigen::MatrixXd X = model_block(p.W_hat, v.head(h)) + Lam / mu;
      eig.compute(X);
      Eigen::VectorXd lam_pos = eig.eigenvalues().cwiseMax(0.0);
      Lam = mu * eig.eigenvectors() * lam_pos.asDiagonal() *
            eig.eigenvectors().transpose();
    }
    if (trace_lvl >= 1)
      std::fprintf(stderr, "cf level %d mu %.3e max_eig %.6e\n", iters, mu,
                   max_eig);
    out.report.penalty_trajectory.push_back(mu);
    if (max_eig > 0.25 * prev_gap) mu = std::min(mu * p.penalty_growth, mu_cap);
    prev_gap = max_eig;
  }

  out.W_o = v.head(h).transpose();
  out.b_o = v(h);
  Eigen::MatrixXd M = model_block(p.W_hat, v.head(h));
  out.form.A_o = M.topLeftCorner(s, s);
  out.form.B_o = M.topRightCorner(s, d - s);
  out.form.C_o = M.bottomLeftCorner(d - s, s);
  out.form.D_o = M.bottomRightCorner(d - s, d - s);

  CriticFitReport& rep = out.report;
  rep.outer_iters = iters;
  rep.max_block_eig = max_eig;
  rep.res_cost_match = (p.P + out.form.A_o - p.K.transpose() * out.form.C_o -
                        out.form.B_o * p.K +
                        p.K.transpose() * out.form.D_o * p.K)
                           .norm();
  rep.res_block_match = (0.25 * p.W_hat.transpose() *
                             v.head(h).asDiagonal() * p.W_hat -
                         M).norm();
  Eigen::RowVectorXd lin_term =
      0.5 * (v.head(h).cwiseProduct(p.b_hat) + v.head(h)).transpose() * p.W_hat;
  rep.res_linear = lin_term.norm();
  rep.res_bias = std::abs(
      v.head(h).dot(0.25 * p.b_hat.cwiseProduct(p.b_hat) + 0.5 * p.b_hat) +
      out.b_o - p.rho_exit);
  double sum_w = v.head(h).sum();
  rep.objective = 0.5 * (out.W_o - p.W_d).squaredNorm() +
                  0.5 * (out.b_o - p.b_d) * (out.b_o - p.b_d) +
                  0.5 * (p.nu + sum_w) * (p.nu + sum_w);
  rep.feasible = rep.res_cost_match <= p.residual_tol &&
                 rep.res_bias <= p.residual_tol &&
                 rep.res_linear <= p.residual_tol &&
                 rep.max_block_eig <= p.nsd_tol;
  if (!rep.feasible) {
    std::ostringstream msg;
    msg << "critic fit infeasible: cost " << rep.res_cost_match << ", linear "
        << rep.res_linear << ", bias " << rep.res_bias << ", max eig "
        << rep.max_block_eig << " after " << iters << " iterations";
    throw Infeasible(msg.str());
  }
  return out;
}

AffineMap swish_layer_map(const NetworkParams& critic, double region_size) {
  int swish_idx = -1;
  for (int l = 0; l < critic.num_layers(); ++l) {
    if (critic.layers[l].act == Activation::Swish) {
      if (swish_idx >= 0) throw ConfigError("critic has more than one swish layer");
      swish_idx = l;
    }
  }
  if (swish_idx < 0) throw ConfigError("critic has no swish layer");
  EffectiveLinearization lin =
      effective_linearization(critic, region_size, swish_idx);
  return {lin.W_eff, lin.b_eff};
}

}  // namespace rlqr
