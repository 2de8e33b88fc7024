#include "rlqr/net.hpp"

#include <cmath>

#include "rlqr/errors.hpp"

namespace rlqr {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Swish: return "swish";
    case Activation::Identity: return "identity";
  }
  throw ConfigError("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "swish") return Activation::Swish;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

static double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double swish(double x) { return x * sigmoid(x); }

NetworkParams init_network(int input_dim, const std::vector<NetSpecLayer>& spec,
                           double output_scale, Rng& rng) {
  if (input_dim <= 0) throw ConfigError("input_dim must be positive");
  if (spec.empty()) throw ConfigError("network needs at least one layer");
  NetworkParams net;
  net.output_scale = output_scale;
  int fan_in = input_dim;
  for (const auto& ls : spec) {
    if (ls.width <= 0) throw ConfigError("layer width must be positive");
    Layer layer;
    layer.act = ls.act;
    layer.W.resize(ls.width, fan_in);
    layer.b.resize(ls.width);
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
        layer.W(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i)
      layer.b(i) = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(layer));
    fan_in = ls.width;
  }
  return net;
}

static void apply_activation(Activation act, double scale, Eigen::MatrixXd& Z) {
  switch (act) {
    case Activation::Relu:
      Z = Z.cwiseMax(0.0);
      break;
    case Activation::Tanh:
      Z = scale * (Z / scale).array().tanh();
      break;
    case Activation::Swish:
      Z = Z.unaryExpr([](double v) { return swish(v); });
      break;
    case Activation::Identity:
      break;
  }
}

// Derivative of the activation at pre-activation value z.
static double activation_grad(Activation act, double scale, double z) {
  switch (act) {
    case Activation::Relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      double t = std::tanh(z / scale);
      return 1.0 - t * t;
    }
    case Activation::Swish: {
      double s = sigmoid(z);
      return s * (1.0 + z * (1.0 - s));
    }
    case Activation::Identity:
      return 1.0;
  }
  return 0.0;
}

Eigen::MatrixXd forward(const NetworkParams& net, const Eigen::MatrixXd& X,
                        ForwardCache* cache, const std::optional<DropoutSpec>& dropout) {
  if (net.layers.empty()) throw ConfigError("network has no layers");
  if (X.cols() != net.input_dim())
    throw DimensionMismatch("input batch has wrong feature count");
  const int L = net.num_layers();
  if (cache) {
    cache->input = X;
    cache->pre.assign(L, {});
    cache->post.assign(L, {});
    cache->mask.assign(L, {});
  }
  std::optional<Rng> drop_rng;
  if (dropout && dropout->rate > 0.0) {
    if (dropout->rate >= 1.0) throw ConfigError("dropout rate must be below 1");
    drop_rng.emplace(dropout->seed);
  }
  Eigen::MatrixXd A = X;
  for (int l = 0; l < L; ++l) {
    const Layer& layer = net.layers[l];
    Eigen::MatrixXd Z = (A * layer.W.transpose()).rowwise() + layer.b.transpose();
    if (cache) cache->pre[l] = Z;
    apply_activation(layer.act, net.output_scale, Z);
    if (drop_rng && l + 1 < L) {
      // Mask elements are drawn in row-major order so the pass is a pure
      // function of the dropout seed.
      double keep = 1.0 - dropout->rate;
      Eigen::MatrixXd M(Z.rows(), Z.cols());
      for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
          M(i, j) = drop_rng->uniform() < dropout->rate ? 0.0 : 1.0 / keep;
      Z = Z.cwiseProduct(M);
      if (cache) cache->mask[l] = std::move(M);
    }
    if (cache) cache->post[l] = Z;
    A = std::move(Z);
  }
  return A;
}

Eigen::VectorXd forward_one(const NetworkParams& net, const Eigen::VectorXd& x) {
  Eigen::MatrixXd out = forward(net, x.transpose());
  return out.row(0).transpose();
}

Gradients make_zero_gradients(const NetworkParams& net) {
  Gradients g;
  for (const auto& layer : net.layers) {
    g.dW.push_back(Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()));
    g.db.push_back(Eigen::VectorXd::Zero(layer.b.size()));
  }
  return g;
}

Gradients backward(const NetworkParams& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& dOut) {
  const int L = net.num_layers();
  if (static_cast<int>(cache.pre.size()) != L)
    throw DimensionMismatch("cache does not match network depth");
  Gradients g;
  g.dW.resize(L);
  g.db.resize(L);
  Eigen::MatrixXd D = dOut;
  for (int l = L - 1; l >= 0; --l) {
    const Layer& layer = net.layers[l];
    const Eigen::MatrixXd& Z = cache.pre[l];
    if (cache.mask[l].size() > 0) D = D.cwiseProduct(cache.mask[l]);
    for (Eigen::Index i = 0; i < D.rows(); ++i)
      for (Eigen::Index j = 0; j < D.cols(); ++j)
        D(i, j) *= activation_grad(layer.act, net.output_scale, Z(i, j));
    const Eigen::MatrixXd& A_prev = l == 0 ? cache.input : cache.post[l - 1];
    g.dW[l].noalias() = D.transpose() * A_prev;
    g.db[l] = D.colwise().sum().transpose();
    if (l > 0)
      D = (D * layer.W).eval();
    else
      g.dX.noalias() = D * layer.W;
  }
  return g;
}

EffectiveLinearization effective_linearization(const NetworkParams& net,
                                               double region_size, int depth) {
  const int L = net.num_layers();
  if (depth < 0) depth = L - 1;
  if (depth >= L) throw ConfigError("linearization depth exceeds network depth");
  EffectiveLinearization lin;
  lin.region_size = region_size;
  Eigen::MatrixXd cumW = Eigen::MatrixXd::Identity(net.input_dim(), net.input_dim());
  Eigen::VectorXd cumb = Eigen::VectorXd::Zero(net.input_dim());
  for (int l = 0; l <= depth; ++l) {
    const Layer& layer = net.layers[l];
    Eigen::MatrixXd G = layer.W * cumW;
    Eigen::VectorXd bh = layer.W * cumb + layer.b;
    lin.layer_gain.push_back(G);
    lin.eff_bias.push_back(bh);
    lin.halfwidth.push_back(bh.cwiseAbs());
    lin.mask.push_back(bh.array() > 0.0);
    if (l == depth) {
      lin.into_last = {cumW, cumb};
      lin.W_eff = std::move(G);
      lin.b_eff = std::move(bh);
      break;
    }
    if (layer.act != Activation::Relu)
      throw ConfigError("layers below the linearization depth must be relu");
    // Units with nonpositive effective bias are inactive at the region
    // origin; zeroing their rows freezes the sign pattern.
    for (Eigen::Index i = 0; i < bh.size(); ++i) {
      if (bh(i) <= 0.0) {
        G.row(i).setZero();
        bh(i) = 0.0;
      }
    }
    cumW = std::move(G);
    cumb = std::move(bh);
  }
  return lin;
}

bool in_linear_region(const EffectiveLinearization& lin, const Eigen::VectorXd& x) {
  const int hidden = static_cast<int>(lin.layer_gain.size()) - 1;
  for (int l = 0; l < hidden; ++l) {
    Eigen::VectorXd dev = lin.layer_gain[l] * x;
    for (Eigen::Index i = 0; i < dev.size(); ++i) {
      double limit = lin.halfwidth[l](i);
      if (l == 0) limit = std::min(limit, lin.region_size);
      if (std::abs(dev(i)) > limit) return false;
    }
  }
  return true;
}

}  // namespace rlqr
