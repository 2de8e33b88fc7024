#include "rlqr/biasshift.hpp"

#include <cmath>
#include <limits>

#include "rlqr/errors.hpp"

namespace rlqr {

void BiasShiftConfig::validate() const {
  if (m <= 0.0) throw ConfigError("region size m must be positive");
  if (c_b <= 1.0) throw ConfigError("c_b must exceed 1");
  if (c_w <= 0.0) throw ConfigError("c_w must be positive");
  if (alpha <= 0.0) throw ConfigError("alpha must be positive");
  if (lambda_lin < 0.0 || lambda_k < 0.0 || lambda_bz < 0.0)
    throw ConfigError("regularizer weights must be nonnegative");
  if (max_bias_increments <= 0)
    throw ConfigError("max_bias_increments must be positive");
}

void initialize_biases(NetworkParams& net, const BiasShiftConfig& cfg, Rng& rng) {
  cfg.validate();
  // Masked effective bias of the finished layers, feeding the next one.
  Eigen::VectorXd carried = Eigen::VectorXd::Zero(net.input_dim());
  bool first = true;
  for (auto& layer : net.layers) {
    Eigen::VectorXd inherited = first
        ? Eigen::VectorXd::Zero(layer.b.size()).eval()
        : (layer.W * carried).eval();
    for (Eigen::Index j = 0; j < layer.b.size(); ++j) {
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      double b = sign * rng.uniform(cfg.m, cfg.c_b * cfg.m);
      long increments = 0;
      while (std::abs(inherited(j) + b) < cfg.m) {
        b += cfg.c_w * b;
        if (++increments > cfg.max_bias_increments)
          throw InitFailure("bias growth exceeded the increment budget");
      }
      layer.b(j) = b;
    }
    carried = (inherited + layer.b).cwiseMax(0.0);
    first = false;
  }
}

int enforce_bias_magnitude(NetworkParams& net, double m, BiasRestrictMode mode,
                           const std::vector<Eigen::VectorXd>* previous) {
  if (mode == BiasRestrictMode::Revert) {
    if (!previous || previous->size() != net.layers.size())
      throw ConfigError("revert mode needs the pre-step biases");
  }
  int adjusted = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::VectorXd& b = net.layers[l].b;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (std::abs(b(j)) >= m) continue;
      if (mode == BiasRestrictMode::Shift)
        b(j) = b(j) < 0.0 ? -m : m;
      else
        b(j) = (*previous)[l](j);
      ++adjusted;
    }
  }
  return adjusted;
}

std::vector<Eigen::VectorXd> collect_biases(const NetworkParams& net) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(net.layers.size());
  for (const auto& layer : net.layers) out.push_back(layer.b);
  return out;
}

double min_abs_bias(const NetworkParams& net) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& layer : net.layers)
    if (layer.b.size() > 0) lo = std::min(lo, layer.b.cwiseAbs().minCoeff());
  return lo;
}

namespace {

// Masked chain state below each layer: maps[l] sends the input to layer l's
// input, with inactive units of every layer before l zeroed out.
struct MaskedChain {
  std::vector<Eigen::MatrixXd> W;  // W[l]: masked gain into layer l
  std::vector<Eigen::VectorXd> b;  // b[l]: masked bias into layer l
  std::vector<Eigen::VectorXd> keep;  // keep[l]: 0/1 mask of layer l itself
};

MaskedChain build_chain(const NetworkParams& net) {
  MaskedChain ch;
  Eigen::MatrixXd cumW =
      Eigen::MatrixXd::Identity(net.input_dim(), net.input_dim());
  Eigen::VectorXd cumb = Eigen::VectorXd::Zero(net.input_dim());
  for (const auto& layer : net.layers) {
    ch.W.push_back(cumW);
    ch.b.push_back(cumb);
    Eigen::VectorXd eff = layer.W * cumb + layer.b;
    Eigen::VectorXd keep =
        (eff.array() > 0.0).cast<double>().matrix();
    ch.keep.push_back(keep);
    cumW = keep.asDiagonal() * (layer.W * cumW);
    cumb = keep.asDiagonal() * eff;
  }
  return ch;
}

// Accumulates the gradient of a residual term R (d/dG where G = W_l * chainW)
// and r (d/dv where v = W_l * chainb [+ b_l]) into all parameters the masked
// chain touches. own_bias marks whether b_l itself entered v.
void backprop_chain_term(const NetworkParams& net, const MaskedChain& ch, int l,
                         const Eigen::MatrixXd* R, const Eigen::VectorXd* r,
                         bool own_bias, double weight, Gradients* g) {
  if (!g) return;
  if (R) g->dW[l].noalias() += weight * (*R) * ch.W[l].transpose();
  if (r) {
    g->dW[l].noalias() += weight * (*r) * ch.b[l].transpose();
    if (own_bias) g->db[l] += weight * (*r);
  }
  // Adjoints of the masked chain quantities feeding layer l.
  Eigen::MatrixXd LamW;
  if (R) LamW = net.layers[l].W.transpose() * (*R);
  Eigen::VectorXd lamb;
  if (r) lamb = net.layers[l].W.transpose() * (*r);
  for (int k = l - 1; k >= 0; --k) {
    const auto& keep = ch.keep[k];
    if (R) {
      Eigen::MatrixXd masked = keep.asDiagonal() * LamW;
      g->dW[k].noalias() += weight * masked * ch.W[k].transpose();
      if (k > 0) LamW = net.layers[k].W.transpose() * masked;
    }
    if (r) {
      Eigen::VectorXd masked = keep.asDiagonal() * lamb;
      g->dW[k].noalias() += weight * masked * ch.b[k].transpose();
      g->db[k] += weight * masked;
      if (k > 0) lamb = net.layers[k].W.transpose() * masked;
    }
  }
}

}  // namespace

double regularization(const NetworkParams& net, const BiasShiftConfig& cfg,
                      const Eigen::MatrixXd* K_target, Gradients* grads) {
  cfg.validate();
  const int L = net.num_layers();
  MaskedChain ch = build_chain(net);
  double loss = 0.0;
  for (int l = 0; l < L; ++l) {
    const Layer& layer = net.layers[l];
    Eigen::MatrixXd G = layer.W * ch.W[l];
    // Sign targets are held fixed, so the term is smooth at the current point.
    Eigen::MatrixXd R =
        G - cfg.alpha * G.unaryExpr([](double v) {
              return v < 0.0 ? -1.0 : 1.0;
            });
    Eigen::VectorXd r = layer.W * ch.b[l];
    loss += 0.5 * cfg.lambda_lin * (R.squaredNorm() + r.squaredNorm());
    backprop_chain_term(net, ch, l, &R, &r, /*own_bias=*/false,
                        cfg.lambda_lin, grads);
  }
  if (K_target) {
    const int l = L - 1;
    const Layer& last = net.layers[l];
    if (K_target->cols() != net.input_dim() ||
        K_target->rows() != last.W.rows())
      throw DimensionMismatch("K target shape does not match the output map");
    Eigen::MatrixXd Rk = last.W * ch.W[l] + *K_target;
    loss += 0.5 * cfg.lambda_k * Rk.squaredNorm();
    backprop_chain_term(net, ch, l, &Rk, nullptr, false, cfg.lambda_k, grads);

    Eigen::VectorXd rb = last.W * ch.b[l] + last.b;
    loss += 0.5 * cfg.lambda_bz * rb.squaredNorm();
    backprop_chain_term(net, ch, l, nullptr, &rb, /*own_bias=*/true,
                        cfg.lambda_bz, grads);
  }
  return loss;
}

}  // namespace rlqr
