#pragma once

#include <cstdint>
#include <random>

namespace rlqr {

// Deterministic random stream. All sampling goes through the methods below
// rather than std::uniform_real_distribution and friends, whose output is
// implementation defined; this keeps runs bitwise reproducible across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. The second value of each pair is cached.
  double normal();

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  // Mixes a stream id into a master seed so sub-streams are independent.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Stream ids for the named sub-streams of a training run.
namespace streams {
inline constexpr std::uint64_t kActorInit = 1;
inline constexpr std::uint64_t kCritic1Init = 2;
inline constexpr std::uint64_t kCritic2Init = 3;
inline constexpr std::uint64_t kActorBias = 4;
inline constexpr std::uint64_t kCritic1Bias = 5;
inline constexpr std::uint64_t kCritic2Bias = 6;
inline constexpr std::uint64_t kExploration = 7;
inline constexpr std::uint64_t kTargetNoise = 8;
inline constexpr std::uint64_t kReplay = 9;
inline constexpr std::uint64_t kReset = 10;
inline constexpr std::uint64_t kWarmup = 11;
inline constexpr std::uint64_t kDropout = 12;
inline constexpr std::uint64_t kEval = 13;
}  // namespace streams

}  // namespace rlqr
