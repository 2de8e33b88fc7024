#include "rlqr/replay.hpp"

#include <unordered_set>
#include <vector>

#include "rlqr/errors.hpp"

namespace rlqr {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim,
                           std::uint64_t seed)
    : cap_(capacity), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  if (state_dim <= 0 || action_dim <= 0)
    throw ConfigError("replay dimensions must be positive");
  s_.resize(capacity, state_dim);
  a_.resize(capacity, action_dim);
  s_next_.resize(capacity, state_dim);
  r_.resize(capacity);
  done_.resize(capacity);
}

void ReplayBuffer::add(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                       double r, const Eigen::VectorXd& s_next, bool done) {
  if (s.size() != s_.cols() || a.size() != a_.cols() ||
      s_next.size() != s_next_.cols())
    throw ConfigError("transition dimensions do not match the buffer");
  s_.row(next_) = s.transpose();
  a_.row(next_) = a.transpose();
  s_next_.row(next_) = s_next.transpose();
  r_(next_) = r;
  done_(next_) = done ? 1.0 : 0.0;
  next_ = (next_ + 1) % cap_;
  if (size_ < cap_) ++size_;
}

ReplayBuffer::Batch ReplayBuffer::sample(int n) {
  if (n <= 0 || static_cast<std::size_t>(n) > size_)
    throw ConfigError("batch size exceeds buffer contents");
  std::vector<std::uint64_t> picks;
  picks.reserve(n);
  std::unordered_set<std::uint64_t> seen;
  while (picks.size() < static_cast<std::size_t>(n)) {
    std::uint64_t idx = rng_.uniform_int(size_);
    if (seen.insert(idx).second) picks.push_back(idx);
  }
  Batch b;
  b.s.resize(n, s_.cols());
  b.a.resize(n, a_.cols());
  b.s_next.resize(n, s_next_.cols());
  b.r.resize(n);
  b.done.resize(n);
  for (int k = 0; k < n; ++k) {
    auto idx = static_cast<Eigen::Index>(picks[k]);
    b.s.row(k) = s_.row(idx);
    b.a.row(k) = a_.row(idx);
    b.s_next.row(k) = s_next_.row(idx);
    b.r(k) = r_(idx);
    b.done(k) = done_(idx);
  }
  return b;
}

}  // namespace rlqr
