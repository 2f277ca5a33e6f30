#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "uavsearch/environment.hpp"
#include "uavsearch/nn.hpp"
#include "uavsearch/rng.hpp"

namespace uavsearch {

struct Transition {
  Observation state;
  Action action = Action::kNorth;
  double reward = 0.0;
  Observation next_state;
  bool terminal = false;
};

/// Fixed-capacity circular store of transitions; observations are kept as float.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, Eigen::Index local_dim, Eigen::Index global_dim);

  void push(const Observation& state, Action action, double reward, const Observation& next_state,
            bool terminal);
  void push(const Transition& t) { push(t.state, t.action, t.reward, t.next_state, t.terminal); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return fill_; }
  /// Slot the next push writes to.
  std::size_t cursor() const { return cursor_; }

  /// Transition stored at slot `i` (observations widened back to double).
  Transition at(std::size_t i) const;

  /// Gathers the given slots into network batches.
  void gather(const std::vector<std::size_t>& slots, nn::Batch<float>& states, nn::Batch<float>& next_states,
              std::vector<int>& actions, Eigen::VectorXf& rewards, Eigen::VectorXf& terminal) const;

 private:
  std::size_t capacity_;
  std::size_t fill_ = 0;
  std::size_t cursor_ = 0;
  int F_ = 0;
  int G_ = 0;
  nn::Matrix<float> local_, global_, next_local_, next_global_;
  Eigen::VectorXf budget_, next_budget_, reward_, terminal_;
  std::vector<int> action_;
};

struct TrainConfig {
  double gamma = 0.95;
  double tau = 0.005;
  double lambda = 0.1;
  double alpha = 3e-5;
  int batch = 128;
  std::size_t buffer = 50000;
  long n_steps = 10'000'000;  ///< environment steps
  int n_val = 120;
  double fill_fraction = 0.5;
  long val_interval = 50000;  ///< learner steps between validations
  int parallel_envs = 12;
  int train_every = 4;  ///< environment steps per gradient step
  double max_grad_norm = 10.0;  ///< 0 disables clipping
  bool single_threaded = true;

  void validate() const;
};

/// y = r for terminal transitions, r + gamma * max(next) otherwise.
template <typename Derived>
double td_target(double reward, const Eigen::DenseBase<Derived>& next_target_values, double gamma, bool terminal) {
  if (terminal) return reward;
  return reward + gamma * static_cast<double>(next_target_values.maxCoeff());
}

/// target <- (1 - tau) target + tau policy, element-wise.
template <typename Scalar>
void soft_update(nn::Vector<Scalar>& target, const nn::Vector<Scalar>& policy, double tau) {
  if (target.size() != policy.size()) throw std::invalid_argument("soft_update: length mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  if (tau == 1.0) {
    target = policy;
    return;
  }
  const auto t = static_cast<Scalar>(tau);
  target = (Scalar(1) - t) * target + t * policy;
}

/// Policy/target networks and optimizer owned by the learner.
struct Learner {
  nn::QNetwork<float> net;
  nn::Vector<float> policy;
  nn::Vector<float> target;
  nn::AdamState<float> adam;
  RngStream minibatch_rng;
  // Scratch reused across train steps.
  nn::ForwardCache<float> policy_cache, target_cache;
  nn::Batch<float> states, next_states;

  Learner(const nn::QNetworkSpec& spec, nn::Vector<float> initial, double alpha, std::uint64_t seed);
};

/// One minibatch update: mean smooth-L1 between Q(s, a) and the TD target,
/// an Adam step on the policy parameters and a soft target update. Returns
/// the loss. Throws std::logic_error if the buffer holds fewer than
/// cfg.batch transitions.
double train_step(const ReplayBuffer& buffer, Learner& learner, const TrainConfig& cfg);

/// Uniform minibatch slots, without replacement.
std::vector<std::size_t> sample_slots(std::size_t fill, std::size_t count, RngStream& rng);

struct HistoryEntry {
  long env_step = 0;
  long learner_step = 0;
  double loss = 0.0;  ///< mean training loss since the previous entry
  double val_mean_reward = 0.0;
  double val_mean_found_fraction = 0.0;
};

struct TrainResult {
  nn::Vector<float> best_params;
  nn::Vector<float> final_params;
  std::vector<HistoryEntry> history;
  double best_val_reward = 0.0;
  long best_learner_step = -1;  ///< -1 when no validation ran
  long env_steps = 0;
  long learner_steps = 0;
  long episodes = 0;
};

using EnvFactory = std::function<Environment(int worker)>;

/// Actors act with the softmax policy and feed the replay buffer; the learner
/// trains once the buffer reaches fill_fraction; every val_interval learner
/// steps the greedy policy runs n_val fixed validation episodes and the best
/// mean reward wins. Multi-threaded and single-threaded runs give identical
/// results for the same seed.
TrainResult training_loop(const EnvFactory& make_env, const nn::QNetworkSpec& spec, const TrainConfig& cfg,
                          std::uint64_t seed, const std::function<void(const HistoryEntry&)>& on_validation = {});

/// Seeds of the fixed validation episodes for a training seed.
std::vector<std::uint64_t> validation_seeds(std::uint64_t seed, int n_val);

}  // namespace uavsearch
