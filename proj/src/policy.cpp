#include "uavsearch/policy.hpp"

#include <stdexcept>

namespace uavsearch {

Eigen::VectorXd softmax_probabilities(const Eigen::Ref<const Eigen::VectorXd>& q_values, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("softmax: lambda must be > 0");
  const double top = q_values.maxCoeff();
  Eigen::VectorXd p = ((q_values.array() - top) / lambda).exp().matrix();
  return p / p.sum();
}

Action softmax_action(const Eigen::Ref<const Eigen::VectorXd>& q_values, double lambda, RngStream& rng) {
  const Eigen::VectorXd p = softmax_probabilities(q_values, lambda);
  const double u = next_uniform(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<Action>(i);
  }
  // u landed in the rounding gap above the cumulative sum.
  Eigen::Index last = p.size() - 1;
  while (last > 0 && p(last) == 0.0) --last;
  return static_cast<Action>(last);
}

nn::Batch<float> make_batch(std::span<const Observation* const> observations) {
  if (observations.empty()) throw std::invalid_argument("make_batch: empty batch");
  const auto n = static_cast<Eigen::Index>(observations.size());
  nn::Batch<float> batch;
  batch.local.resize(observations.front()->local.size(), n);
  batch.global.resize(observations.front()->global.size(), n);
  batch.budget.resize(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& obs = *observations[static_cast<std::size_t>(i)];
    batch.local.col(i) = obs.local.cast<float>();
    batch.global.col(i) = obs.global.cast<float>();
    batch.budget(0, i) = static_cast<float>(obs.budget);
  }
  return batch;
}

nn::Batch<float> make_batch(const Observation& obs) {
  const Observation* one[] = {&obs};
  return make_batch(one);
}

std::optional<Action> GreedyQPolicy::act(const EnvState&, const Observation& obs) {
  values_ = net_.forward(params_, make_batch(obs), cache_).col(0).cast<double>();
  return greedy_action(values_);
}

void RandomWalkPolicy::begin_episode(const EnvState&, std::uint64_t episode_seed) {
  rng_ = RngStream(episode_seed, StreamId::kRandomPolicy);
}

std::optional<Action> RandomWalkPolicy::act(const EnvState&, const Observation&) {
  return static_cast<Action>(rng_.next_index(4));
}

void RowByRowPolicy::begin_episode(const EnvState& state, std::uint64_t) {
  const int M = state.field.M;
  const int F = static_cast<int>(state.current_detection.rows());
  const Corner corner = state.start == start_cell(M, F, Corner::kTopLeft) ? Corner::kTopLeft
                                                                          : Corner::kBottomRight;
  plan_ = plan_row_by_row(M, F, corner);
  next_ = 0;
}

std::optional<Action> RowByRowPolicy::act(const EnvState&, const Observation&) {
  if (next_ >= plan_.actions.size()) return std::nullopt;
  return plan_.actions[next_++];
}

}  // namespace uavsearch
