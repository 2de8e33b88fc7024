#include <cmath>
#include <cstdio>
#include <filesystem>

#include <Eigen/Dense>

#include "doctest.h"
#include "rlqr/biasshift.hpp"
#include "rlqr/errors.hpp"
#include "rlqr/net.hpp"
#include "rlqr/net_io.hpp"
#include "rlqr/rng.hpp"

using namespace rlqr;

namespace {

// Oracle: scalar re-evaluation of the network with plain loops, no Eigen
// products, so shapes and transposes cannot silently cancel out.
std::vector<double> slow_forward(const NetworkParams& net,
                                 const std::vector<double>& x) {
  std::vector<double> a = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& L = net.layers[l];
    std::vector<double> z(L.W.rows());
    for (Eigen::Index i = 0; i < L.W.rows(); ++i) {
      double s = L.b(i);
      for (Eigen::Index j = 0; j < L.W.cols(); ++j) s += L.W(i, j) * a[j];
      z[static_cast<std::size_t>(i)] = s;
    }
    a.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      double v = z[i];
      switch (L.act) {
        case Activation::Relu: a[i] = v > 0 ? v : 0; break;
        case Activation::Tanh:
          a[i] = net.output_scale * std::tanh(v / net.output_scale);
          break;
        case Activation::Swish: a[i] = v / (1.0 + std::exp(-v)); break;
        case Activation::Identity: a[i] = v; break;
      }
    }
  }
  return a;
}

NetworkParams random_net(const std::vector<NetSpecLayer>& spec, int input_dim,
                         double scale, std::uint64_t seed) {
  Rng rng(seed);
  return init_network(input_dim, spec, scale, rng);
}

double loss_of(const NetworkParams& net, const Eigen::MatrixXd& X) {
  // fixed scalarization: sum of squares of the output batch
  Eigen::MatrixXd Y = forward(net, X);
  return Y.squaredNorm();
}

// Central finite difference of loss_of w.r.t. one parameter entry.
double fd_param(NetworkParams net, int layer, int row, int col, bool bias,
                const Eigen::MatrixXd& X, double h = 1e-6) {
  double& ref = bias ? net.layers[layer].b(row) : net.layers[layer].W(row, col);
  double saved = ref;
  ref = saved + h;
  double up = loss_of(net, X);
  ref = saved - h;
  double down = loss_of(net, X);
  ref = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("forward on single layer relu examples") {
  NetworkParams net;
  net.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0),
                        Eigen::VectorXd::Zero(1), Activation::Relu});
  Eigen::VectorXd x(1);
  x << -3.0;
  CHECK(forward_one(net, x)(0) == 0.0);

  net.layers[0].W(0, 0) = 2.0;
  net.layers[0].b(0) = 1.0;
  x << 1.0;
  CHECK(forward_one(net, x)(0) == 3.0);
}

TEST_CASE("forward equals the scalar re-evaluation oracle") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    NetworkParams net = random_net(
        {{7, Activation::Relu}, {5, Activation::Swish}, {2, Activation::Tanh}},
        3, 1.7, seed);
    Rng rng(seed + 100);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(3);
      std::vector<double> xs(3);
      for (int i = 0; i < 3; ++i) {
        x(i) = rng.uniform(-2.0, 2.0);
        xs[static_cast<std::size_t>(i)] = x(i);
      }
      Eigen::VectorXd got = forward_one(net, x);
      std::vector<double> want = slow_forward(net, xs);
      REQUIRE(got.size() == 2);
      for (int i = 0; i < 2; ++i)
        CHECK(got(i) == doctest::Approx(want[static_cast<std::size_t>(i)])
                            .epsilon(1e-13));
    }
  }
}

TEST_CASE("batched forward equals stacked single-sample forwards") {
  NetworkParams net = random_net(
      {{6, Activation::Relu}, {4, Activation::Relu}, {1, Activation::Tanh}}, 2,
      0.8, 17);
  Rng rng(99);
  Eigen::MatrixXd X(5, 2);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd Y = forward(net, X);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd yi = forward_one(net, X.row(i).transpose());
    CHECK((Y.row(i).transpose() - yi).norm() == 0.0);
  }
}

TEST_CASE("scaled tanh output saturates at the scale and is near identity at 0") {
  NetworkParams net;
  net.layers.push_back({Eigen::MatrixXd::Identity(1, 1),
                        Eigen::VectorXd::Zero(1), Activation::Tanh});
  net.output_scale = 0.8;
  Eigen::VectorXd x(1);
  x << 50.0;
  CHECK(forward_one(net, x)(0) == doctest::Approx(0.8).epsilon(1e-12));
  x << -50.0;
  CHECK(forward_one(net, x)(0) == doctest::Approx(-0.8).epsilon(1e-12));
  x << 1e-4;
  // s tanh(z/s) = z - z^3/(3 s^2) + ...
  CHECK(forward_one(net, x)(0) == doctest::Approx(1e-4).epsilon(1e-8));
}

TEST_CASE("backward single linear layer matches the analytic gradient") {
  NetworkParams net;
  Eigen::MatrixXd W(1, 2);
  W << 0.5, -1.5;
  Eigen::VectorXd b(1);
  b << 0.25;
  net.layers.push_back({W, b, Activation::Identity});
  Eigen::MatrixXd X(1, 2);
  X << 2.0, 3.0;
  double y_target = 1.0;
  ForwardCache cache;
  Eigen::MatrixXd Y = forward(net, X, &cache);
  // L = (y - t)^2, dL/dy = 2 (y - t); y = 0.5*2 - 1.5*3 + 0.25 = -3.25
  CHECK(Y(0, 0) == doctest::Approx(-3.25).epsilon(1e-14));
  Eigen::MatrixXd dOut(1, 1);
  dOut << 2.0 * (Y(0, 0) - y_target);
  Gradients g = backward(net, cache, dOut);
  CHECK(g.dW[0](0, 0) == doctest::Approx(2.0 * (-4.25) * 2.0).epsilon(1e-12));
  CHECK(g.dW[0](0, 1) == doctest::Approx(2.0 * (-4.25) * 3.0).epsilon(1e-12));
  CHECK(g.db[0](0) == doctest::Approx(2.0 * (-4.25)).epsilon(1e-12));
  CHECK(g.dX(0, 0) == doctest::Approx(2.0 * (-4.25) * 0.5).epsilon(1e-12));
  CHECK(g.dX(0, 1) == doctest::Approx(2.0 * (-4.25) * -1.5).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on random nets") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull}) {
    NetworkParams net = random_net(
        {{6, Activation::Relu}, {5, Activation::Swish}, {3, Activation::Tanh}},
        4, 1.3, seed);
    Rng rng(seed * 7 + 1);
    Eigen::MatrixXd X(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) X(i, j) = rng.uniform(-1.5, 1.5);
    ForwardCache cache;
    Eigen::MatrixXd Y = forward(net, X, &cache);
    Gradients g = backward(net, cache, 2.0 * Y);  // d/dz of sum z^2

    for (int l = 0; l < net.num_layers(); ++l) {
      const Layer& L = net.layers[l];
      for (int r = 0; r < L.W.rows(); r += 2)
        for (int c = 0; c < L.W.cols(); c += 2) {
          double fd = fd_param(net, l, r, c, false, X);
          double an = g.dW[static_cast<std::size_t>(l)](r, c);
          CHECK(std::abs(fd - an) <=
                1e-5 * std::max({1.0, std::abs(fd), std::abs(an)}));
        }
      for (int r = 0; r < L.b.size(); r += 2) {
        double fd = fd_param(net, l, r, 0, true, X);
        double an = g.db[static_cast<std::size_t>(l)](r);
        CHECK(std::abs(fd - an) <=
              1e-5 * std::max({1.0, std::abs(fd), std::abs(an)}));
      }
    }

    // input gradient along a random direction
    Eigen::MatrixXd D(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) D(i, j) = rng.uniform(-1.0, 1.0);
    double h = 1e-6;
    NetworkParams tmp = net;
    double up = loss_of(tmp, X + h * D);
    double down = loss_of(tmp, X - h * D);
    double fd = (up - down) / (2 * h);
    double an = (g.dX.array() * D.array()).sum();
    CHECK(std::abs(fd - an) <= 1e-5 * std::max({1.0, std::abs(fd), std::abs(an)}));
  }
}

TEST_CASE("relu subgradient at exactly zero is zero") {
  NetworkParams net;
  Eigen::MatrixXd W1(1, 1), W2(1, 1);
  W1 << 1.0;
  W2 << 3.0;
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1);
  net.layers.push_back({W1, z1, Activation::Relu});
  net.layers.push_back({W2, z1, Activation::Identity});
  Eigen::MatrixXd X(1, 1);
  X << 0.0;  // pre-activation exactly 0
  ForwardCache cache;
  forward(net, X, &cache);
  Eigen::MatrixXd dOut(1, 1);
  dOut << 1.0;
  Gradients g = backward(net, cache, dOut);
  CHECK(g.dW[0](0, 0) == 0.0);
  CHECK(g.db[0](0) == 0.0);
  CHECK(g.dX(0, 0) == 0.0);
}

TEST_CASE("dropout is reproducible by seed and rescales kept units") {
  NetworkParams net = random_net(
      {{32, Activation::Relu}, {16, Activation::Relu}, {1, Activation::Identity}},
      2, 1.0, 5);
  Eigen::MatrixXd X(4, 2);
  X << 0.3, -0.2, 1.0, 0.5, -0.7, 0.1, 0.0, 0.9;

  Eigen::MatrixXd base = forward(net, X);
  CHECK((forward(net, X) - base).norm() == 0.0);  // no dropout: deterministic

  DropoutSpec d{0.4, 1234};
  Eigen::MatrixXd a = forward(net, X, nullptr, d);
  Eigen::MatrixXd b = forward(net, X, nullptr, d);
  CHECK((a - b).norm() == 0.0);  // same seed: bit identical

  DropoutSpec d2{0.4, 1235};
  Eigen::MatrixXd c = forward(net, X, nullptr, d2);
  CHECK((a - c).norm() > 0.0);

  // every hidden activation is either dropped or scaled by 1/(1-rate)
  ForwardCache cache;
  forward(net, X, &cache, d);
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    const Eigen::MatrixXd& pre = cache.pre[l];
    const Eigen::MatrixXd& post = cache.post[l];
    for (Eigen::Index i = 0; i < pre.rows(); ++i)
      for (Eigen::Index j = 0; j < pre.cols(); ++j) {
        double relu = std::max(0.0, pre(i, j));
        bool dropped = post(i, j) == 0.0;
        bool scaled =
            std::abs(post(i, j) - relu / 0.6) <= 1e-12 * std::abs(relu) + 1e-15;
        CHECK((dropped || scaled));
      }
  }
}

TEST_CASE("effective linearization on the one and two layer hand examples") {
  NetworkParams net;
  Eigen::MatrixXd W1(2, 1);
  W1 << 1.0, -1.0;
  Eigen::VectorXd b1(2);
  b1 << 2.0, -2.0;
  net.layers.push_back({W1, b1, Activation::Relu});
  Eigen::MatrixXd W2(1, 2);
  W2 << 1.0, 1.0;
  Eigen::VectorXd b2(1);
  b2 << 0.5;
  net.layers.push_back({W2, b2, Activation::Identity});

  EffectiveLinearization lin = effective_linearization(net, 1.0);
  REQUIRE(lin.mask[0].size() == 2);
  CHECK(lin.mask[0](0) == true);
  CHECK(lin.mask[0](1) == false);
  CHECK(lin.halfwidth[0](0) == doctest::Approx(2.0));
  CHECK(lin.halfwidth[0](1) == doctest::Approx(2.0));
  REQUIRE(lin.W_eff.rows() == 1);
  REQUIRE(lin.W_eff.cols() == 1);
  CHECK(lin.W_eff(0, 0) == doctest::Approx(1.0));
  CHECK(lin.b_eff(0) == doctest::Approx(2.5));
  CHECK(lin.halfwidth[1](0) == doctest::Approx(2.5));

  Eigen::VectorXd x(1);
  x << 0.9;
  CHECK(in_linear_region(lin, x));
  x << 1.1;
  CHECK(!in_linear_region(lin, x));
  x << 0.0;
  CHECK(in_linear_region(lin, x));
}

TEST_CASE("inside the region the net is exactly its effective affine map") {
  const double m = 0.2;
  BiasShiftConfig cfg;
  cfg.m = m;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(Rng::derive(seed, 1));
    NetworkParams net = init_network(
        2, {{24, Activation::Relu}, {12, Activation::Relu}, {1, Activation::Tanh}},
        0.8, rng);
    Rng brng(Rng::derive(seed, 2));
    initialize_biases(net, cfg, brng);
    EffectiveLinearization lin = effective_linearization(net, m);

    Rng xrng(Rng::derive(seed, 3));
    for (int t = 0; t < 100; ++t) {
      // the region is convex and contains 0, so shrink toward 0 until inside
      Eigen::VectorXd x(2);
      x << xrng.uniform(-m, m), xrng.uniform(-m, m);
      int guard = 0;
      while (!in_linear_region(lin, x) && guard++ < 60) x *= 0.5;
      REQUIRE(in_linear_region(lin, x));

      ForwardCache cache;
      forward(net, x.transpose(), &cache);
      Eigen::VectorXd pre_out = cache.pre.back().row(0).transpose();
      Eigen::VectorXd affine = lin.W_eff * x + lin.b_eff;
      CHECK((pre_out - affine).lpNorm<Eigen::Infinity>() <= 1e-10);

      // forward activation pattern agrees with the linearization masks
      for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
        for (Eigen::Index u = 0; u < cache.pre[l].cols(); ++u) {
          bool active = cache.pre[l](0, u) > 0.0;
          CHECK(active == lin.mask[l](u));
        }
    }
  }
}

TEST_CASE("linearization requires relu below the cut") {
  NetworkParams net = random_net(
      {{4, Activation::Swish}, {1, Activation::Identity}}, 2, 1.0, 3);
  CHECK_THROWS_AS(effective_linearization(net, 0.2), ConfigError);
  // cutting at depth 0 never inspects the swish layer
  EffectiveLinearization lin = effective_linearization(net, 0.2, 0);
  CHECK(lin.W_eff.rows() == 4);
}

TEST_CASE("network file round trip is bitwise exact") {
  NetworkParams net = random_net(
      {{9, Activation::Relu}, {5, Activation::Swish}, {2, Activation::Tanh}}, 3,
      0.8, 21);
  std::filesystem::path p =
      std::filesystem::temp_directory_path() / "rlqr_net_roundtrip.txt";
  save_network(net, p.string());
  NetworkParams back = load_network(p.string());
  REQUIRE(back.num_layers() == net.num_layers());
  CHECK(back.output_scale == net.output_scale);
  for (int l = 0; l < net.num_layers(); ++l) {
    CHECK(back.layers[l].act == net.layers[l].act);
    CHECK((back.layers[l].W - net.layers[l].W).norm() == 0.0);
    CHECK((back.layers[l].b - net.layers[l].b).norm() == 0.0);
  }
  std::filesystem::remove(p);
}

TEST_CASE("malformed network files are rejected") {
  std::filesystem::path p =
      std::filesystem::temp_directory_path() / "rlqr_net_bad.txt";
  {
    std::FILE* f = std::fopen(p.string().c_str(), "w");
    std::fputs("rlqr-net 1\noutput_scale 1\nlayers 1\nlayer relu 2 2\n1 2\n",
               f);  // truncated weight rows
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_network(p.string()), ConfigError);
  CHECK_THROWS_AS(load_network("/nonexistent/rlqr/netfile.txt"), ConfigError);
  std::filesystem::remove(p);
}
