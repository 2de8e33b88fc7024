#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "rlqr/rng.hpp"

namespace rlqr {

// Ring buffer of transitions in column-parallel storage, so batch assembly
// is a row gather.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim,
               std::uint64_t seed);

  void add(const Eigen::VectorXd& s, const Eigen::VectorXd& a, double r,
           const Eigen::VectorXd& s_next, bool done);

  struct Batch {
    Eigen::MatrixXd s;
    Eigen::MatrixXd a;
    Eigen::VectorXd r;
    Eigen::MatrixXd s_next;
    Eigen::VectorXd done;  // 1.0 terminal, 0.0 otherwise
  };

  // Uniform without replacement. Throws ConfigError when n exceeds size().
  Batch sample(int n);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return cap_; }

 private:
  std::size_t cap_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  Eigen::MatrixXd s_, a_, s_next_;
  Eigen::VectorXd r_, done_;
  Rng rng_;
};

}  // namespace rlqr
