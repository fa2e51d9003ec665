#pragma once

#include "dkf/linalg.hpp"

#include <cstdint>
#include <limits>

namespace dkf {

/// Noise sources that get independent streams.
enum class NoiseSource : std::uint32_t { initial_state = 0, process = 1, measurement = 2 };

/// SplitMix64 (Steele, Lea & Flood 2014) keyed by a hash of
/// (seed, source, agent, k). Every (run, source, agent, step) has its own
/// stream, so draws do not depend on evaluation order or thread count.
/// Satisfies UniformRandomBitGenerator.
class NoiseStream {
 public:
  using result_type = std::uint64_t;

  NoiseStream(std::uint64_t seed, NoiseSource source, int agent, int k);
  explicit NoiseStream(std::uint64_t key) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Independent standard normals (Boost ziggurat, platform-stable).
  Vector standard_normal(Index size);

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

/// Draws from N(0, Σ). Uses a Cholesky factor when Σ is positive definite and
/// otherwise a symmetric square root with negative eigenvalues clamped to 0,
/// so singular covariances (e.g. a known initial state) are allowed.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& covariance);

  Vector sample(NoiseStream& stream) const;
  const Matrix& factor() const { return factor_; }
  Index dim() const { return factor_.rows(); }

 private:
  Matrix factor_;
  bool zero_ = false;
};

}  // namespace dkf
