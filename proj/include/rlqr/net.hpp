#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlqr/rng.hpp"

namespace rlqr {

enum class Activation { Relu, Tanh, Swish, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// One dense layer y = act(x W' + b). W is out x in.
struct Layer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Activation act = Activation::Relu;
};

// Feedforward network. Rows of a batch are samples. When the final layer is
// Tanh, its output is squashed as out = s * tanh(z / s) with s = output_scale,
// so the pre-activation z keeps unit gain near zero and the output saturates
// at +-s. Other activations ignore output_scale.
struct NetworkParams {
  std::vector<Layer> layers;
  double output_scale = 1.0;

  int input_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().W.rows()); }
  int num_layers() const { return static_cast<int>(layers.size()); }
};

// Inverted-dropout spec. A mask with keep probability 1 - rate scales kept
// units by 1/(1 - rate); the mask stream is derived from seed so a forward
// pass is a pure function of its arguments. Applied to hidden activations
// only.
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

// Layer sizes + activations for construction.
struct NetSpecLayer {
  int width;
  Activation act;
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases likewise.
NetworkParams init_network(int input_dim, const std::vector<NetSpecLayer>& layers,
                           double output_scale, Rng& rng);

struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // activations after dropout per layer
  std::vector<Eigen::MatrixXd> mask;  // dropout scale masks (empty if unused)
};

// Returns the output batch. Cache, when supplied, receives everything the
// backward pass needs; dropout is applied only when a spec is passed.
Eigen::MatrixXd forward(const NetworkParams& net, const Eigen::MatrixXd& X,
                        ForwardCache* cache = nullptr,
                        const std::optional<DropoutSpec>& dropout = std::nullopt);

// Convenience single-sample forward.
Eigen::VectorXd forward_one(const NetworkParams& net, const Eigen::VectorXd& x);

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  Eigen::MatrixXd dX;  // gradient w.r.t. the input batch
};

Gradients make_zero_gradients(const NetworkParams& net);

// Backpropagates dL/dout (same shape as the forward output) through the
// cached pass. Relu uses subgradient 0 at exactly 0.
Gradients backward(const NetworkParams& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& dOut);

// Affine map z = W x + b.
struct AffineMap {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// Linearization of the masked network around the retained-region origin.
// Hidden layers up to `depth` must be Relu; entry l describes the
// pre-activation of layer l reached through the masked layers before it.
struct EffectiveLinearization {
  double region_size = 0.0;                 // requested half width m
  std::vector<Eigen::MatrixXd> layer_gain;  // gain into layer l pre-activation
  std::vector<Eigen::VectorXd> eff_bias;    // effective bias of layer l
  std::vector<Eigen::VectorXd> halfwidth;   // |eff_bias|, reported per unit
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> mask;  // eff_bias > 0
  AffineMap into_last;   // masked map into the final layer input
  Eigen::MatrixXd W_eff; // final-layer pre-activation gain
  Eigen::VectorXd b_eff; // final-layer pre-activation offset
};

// Linearizes layers [0, depth) as masked Relu layers and composes layer
// `depth` on top. depth defaults to the last layer. Throws ConfigError if a
// layer below `depth` is not Relu.
EffectiveLinearization effective_linearization(const NetworkParams& net,
                                               double region_size,
                                               int depth = -1);

// True when every masked Relu unit keeps its sign pattern at x: layer 0 uses
// the tighter of the requested half width and the achieved |eff_bias|, deeper
// layers use the achieved |eff_bias|.
bool in_linear_region(const EffectiveLinearization& lin, const Eigen::VectorXd& x);

double swish(double x);

}  // namespace rlqr
