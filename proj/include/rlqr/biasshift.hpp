#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rlqr/net.hpp"
#include "rlqr/rng.hpp"

namespace rlqr {

struct BiasShiftConfig {
  double m = 0.2;    // linear-region half width and bias magnitude floor
  double c_b = 2.0;  // bias init band is (m, c_b * m) in magnitude
  double c_w = 0.1;  // relative bias growth per increment during init
  double alpha = 1.0;        // per-entry gain target for the layer maps
  double lambda_lin = 1e-3;  // weight of the per-layer maintenance terms
  double lambda_k = 1e-2;    // weight of the output-gain target term
  double lambda_bz = 1e-2;   // weight of the output-offset term
  long max_bias_increments = 10000;

  void validate() const;  // throws ConfigError
};

enum class BiasRestrictMode { Shift, Revert };

// Draws every bias from +-uniform(m, c_b * m); for layers past the first,
// grows each bias geometrically until the effective bias through the masked
// chain clears the floor. Throws InitFailure when the increment budget runs
// out.
void initialize_biases(NetworkParams& net, const BiasShiftConfig& cfg, Rng& rng);

// Restores the bias magnitude floor after a gradient step. Shift mode clamps
// undershooting biases to m * sign(b) (sign(0) counts as +); Revert mode
// restores the pre-step value and requires `previous`. Returns how many
// entries were adjusted.
int enforce_bias_magnitude(NetworkParams& net, double m, BiasRestrictMode mode,
                           const std::vector<Eigen::VectorXd>* previous = nullptr);

std::vector<Eigen::VectorXd> collect_biases(const NetworkParams& net);

double min_abs_bias(const NetworkParams& net);

// Penalty that keeps the masked layer maps near +-alpha, inherited bias
// contributions near zero, and (when K_target is given) the output map near
// u = -Kx with zero offset. All pieces are 0.5 * squared Frobenius norms;
// masks and sign targets are treated as constants of the current point.
// When grads is non-null the penalty gradient is accumulated into it.
double regularization(const NetworkParams& net, const BiasShiftConfig& cfg,
                      const Eigen::MatrixXd* K_target, Gradients* grads);

}  // namespace rlqr
