#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uavsearch/baseline.hpp"
#include "uavsearch/environment.hpp"
#include "uavsearch/nn.hpp"
#include "uavsearch/rng.hpp"

namespace uavsearch {

/// argmax over action values; ties go to the lowest index.
template <typename Derived>
Action greedy_action(const Eigen::DenseBase<Derived>& q_values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q_values.size(); ++i) {
    if (q_values(i) > q_values(best)) best = i;
  }
  return static_cast<Action>(best);
}

/// p(a) = exp(Q(a)/lambda) / sum_i exp(Q(a_i)/lambda), computed after
/// subtracting max Q. Throws std::invalid_argument unless lambda > 0.
Eigen::VectorXd softmax_probabilities(const Eigen::Ref<const Eigen::VectorXd>& q_values, double lambda);

/// Samples an action from the temperature softmax. Consumes one draw.
Action softmax_action(const Eigen::Ref<const Eigen::VectorXd>& q_values, double lambda, RngStream& rng);

/// Packs observations into a float network batch, one column each.
nn::Batch<float> make_batch(std::span<const Observation* const> observations);
nn::Batch<float> make_batch(const Observation& obs);

/// Maps environment states to actions for run_episode.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(const EnvState& /*state*/, std::uint64_t /*episode_seed*/) {}
  /// std::nullopt ends the episode (e.g. a finished coverage plan).
  virtual std::optional<Action> act(const EnvState& state, const Observation& obs) = 0;
  /// Action values behind the most recent decision, if the policy has them.
  virtual const Eigen::VectorXd* last_values() const { return nullptr; }
};

/// Deployment policy: argmax of the Q-network.
class GreedyQPolicy final : public Policy {
 public:
  GreedyQPolicy(const nn::QNetwork<float>& net, nn::Vector<float> params)
      : net_(net), params_(std::move(params)) {}

  std::optional<Action> act(const EnvState& state, const Observation& obs) override;
  const Eigen::VectorXd* last_values() const override { return &values_; }

 private:
  const nn::QNetwork<float>& net_;
  nn::Vector<float> params_;
  nn::ForwardCache<float> cache_;
  Eigen::VectorXd values_;
};

/// Uniformly random movement actions, reseeded from each episode seed.
class RandomWalkPolicy final : public Policy {
 public:
  void begin_episode(const EnvState& state, std::uint64_t episode_seed) override;
  std::optional<Action> act(const EnvState& state, const Observation& obs) override;

 private:
  RngStream rng_{0, StreamId::kRandomPolicy};
};

/// Replays the row-by-row plan for the episode's start corner.
class RowByRowPolicy final : public Policy {
 public:
  void begin_episode(const EnvState& state, std::uint64_t episode_seed) override;
  std::optional<Action> act(const EnvState& state, const Observation& obs) override;

 private:
  CoveragePlan plan_;
  std::size_t next_ = 0;
};

/// Lands immediately.
class LandPolicy final : public Policy {
 public:
  std::optional<Action> act(const EnvState&, const Observation&) override { return Action::kLand; }
};

}  // namespace uavsearch
