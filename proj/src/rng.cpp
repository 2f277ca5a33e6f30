#include "uavsearch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace uavsearch {

std::string_view stream_name(StreamId id) {
  switch (id) {
    case StreamId::kFieldGen: return "field";
    case StreamId::kDetection: return "detection";
    case StreamId::kPrior: return "prior";
    case StreamId::kStartCorner: return "start";
    case StreamId::kExploration: return "exploration";
    case StreamId::kMinibatch: return "minibatch";
    case StreamId::kInit: return "init";
    case StreamId::kEpisodeSeeds: return "episodes";
    case StreamId::kRandomPolicy: return "random_policy";
  }
  return "unknown";
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream_id,
                    0x5eed5eedu};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint32_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return engine_();
}

std::uint64_t RngStream::next_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_index: n must be positive");
  // Lemire-style rejection keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double next_uniform(RngStream& rng) {
  return static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
}

double next_normal(RngStream& rng, double mu, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("next_normal: sigma must be >= 0");
  const double u1 = next_uniform(rng);
  const double u2 = next_uniform(rng);
  if (sigma == 0.0) return mu;
  const double radius = std::sqrt(-2.0 * std::log1p(-u1));
  return mu + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::Matrix2d cholesky2(const Eigen::Matrix2d& cov) {
  const double a = cov(0, 0);
  const double b = cov(1, 0);
  const double c = cov(1, 1);
  const double scale = std::max({std::abs(a), std::abs(c), std::abs(b), 1.0});
  const double tol = 1e-12 * scale;
  if (!cov.allFinite() || std::abs(cov(0, 1) - b) > tol || a < -tol || c < -tol ||
      a * c - b * b < -tol * scale) {
    throw std::invalid_argument("sample_mvn2: covariance must be symmetric positive semi-definite");
  }
  Eigen::Matrix2d lower = Eigen::Matrix2d::Zero();
  if (a > tol) {
    lower(0, 0) = std::sqrt(a);
    lower(1, 0) = b / lower(0, 0);
  } else if (std::abs(b) > tol) {
    throw std::invalid_argument("sample_mvn2: covariance must be symmetric positive semi-definite");
  }
  const double rest = c - lower(1, 0) * lower(1, 0);
  lower(1, 1) = rest > 0.0 ? std::sqrt(rest) : 0.0;
  return lower;
}

Eigen::Vector2d sample_mvn2(RngStream& rng, const Eigen::Vector2d& mean,
                            const Eigen::Matrix2d& cov) {
  const Eigen::Matrix2d lower = cholesky2(cov);
  Eigen::Vector2d z;
  z(0) = next_normal(rng, 0.0, 1.0);
  z(1) = next_normal(rng, 0.0, 1.0);
  return mean + lower * z;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  std::uint64_t z = parent + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace uavsearch
