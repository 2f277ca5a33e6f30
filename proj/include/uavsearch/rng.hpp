#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace uavsearch {

/// Sub-stream identifiers. Each noise source draws from its own stream so one
/// can be varied while the others stay fixed.
enum class StreamId : std::uint32_t {
  kFieldGen = 1,
  kDetection = 2,
  kPrior = 3,
  kStartCorner = 4,
  kExploration = 5,
  kMinibatch = 6,
  kInit = 7,
  kEpisodeSeeds = 8,
  kRandomPolicy = 9,
};

std::string_view stream_name(StreamId id);

/// Deterministic random stream keyed by (seed, stream id). Identical keys give
/// identical draw sequences; `counter()` is the number of raw 64-bit draws
/// consumed so far, so any prefix can be replayed.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t stream_id);
  RngStream(std::uint64_t seed, StreamId id)
      : RngStream(seed, static_cast<std::uint32_t>(id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_index(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

/// Uniform real in [0, 1). Consumes one draw.
double next_uniform(RngStream& rng);

/// Sample from N(mu, sigma) by Box-Muller. Always consumes two draws;
/// sigma == 0 returns mu exactly. Throws std::invalid_argument for sigma < 0.
double next_normal(RngStream& rng, double mu, double sigma);

/// Sample a 2-D Gaussian using the closed-form 2x2 Cholesky factor of `cov`.
/// Semi-definite covariances are accepted; a zero pivot zeroes the matching
/// factor column. Throws std::invalid_argument if `cov` is not symmetric PSD.
Eigen::Vector2d sample_mvn2(RngStream& rng, const Eigen::Vector2d& mean,
                            const Eigen::Matrix2d& cov);

/// Lower-triangular L with L L^T = cov, for symmetric PSD 2x2 `cov`.
Eigen::Matrix2d cholesky2(const Eigen::Matrix2d& cov);

/// Mixes a parent seed with an index into a child seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace uavsearch
