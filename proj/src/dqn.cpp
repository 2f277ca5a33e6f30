#include "uavsearch/dqn.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <thread>

#include "uavsearch/evaluation.hpp"
#include "uavsearch/policy.hpp"

namespace uavsearch {

ReplayBuffer::ReplayBuffer(std::size_t capacity, Eigen::Index local_dim, Eigen::Index global_dim)
    : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  const auto cap = static_cast<Eigen::Index>(capacity);
  local_.resize(local_dim, cap);
  next_local_.resize(local_dim, cap);
  global_.resize(global_dim, cap);
  next_global_.resize(global_dim, cap);
  budget_.resize(cap);
  next_budget_.resize(cap);
  reward_.resize(cap);
  terminal_.resize(cap);
  action_.resize(capacity);
}

void ReplayBuffer::push(const Observation& state, Action action, double reward, const Observation& next_state,
                        bool terminal) {
  if (state.local.size() != local_.rows() || state.global.size() != global_.rows() ||
      next_state.local.size() != local_.rows() || next_state.global.size() != global_.rows()) {
    throw std::invalid_argument("replay buffer: observation shape mismatch");
  }
  F_ = state.F;
  G_ = state.G;
  const auto i = static_cast<Eigen::Index>(cursor_);
  local_.col(i) = state.local.cast<float>();
  global_.col(i) = state.global.cast<float>();
  budget_(i) = static_cast<float>(state.budget);
  next_local_.col(i) = next_state.local.cast<float>();
  next_global_.col(i) = next_state.global.cast<float>();
  next_budget_(i) = static_cast<float>(next_state.budget);
  reward_(i) = static_cast<float>(reward);
  terminal_(i) = terminal ? 1.0f : 0.0f;
  action_[cursor_] = static_cast<int>(action);
  cursor_ = (cursor_ + 1) % capacity_;
  fill_ = std::min(fill_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t slot) const {
  if (slot >= fill_) throw std::out_of_range("replay buffer: slot not filled");
  const auto i = static_cast<Eigen::Index>(slot);
  Transition t;
  t.state = {F_, G_, local_.col(i).cast<double>(), global_.col(i).cast<double>(), budget_(i)};
  t.next_state = {F_, G_, next_local_.col(i).cast<double>(), next_global_.col(i).cast<double>(), next_budget_(i)};
  t.action = static_cast<Action>(action_[slot]);
  t.reward = reward_(i);
  t.terminal = terminal_(i) != 0.0f;
  return t;
}

void ReplayBuffer::gather(const std::vector<std::size_t>& slots, nn::Batch<float>& states,
                          nn::Batch<float>& next_states, std::vector<int>& actions, Eigen::VectorXf& rewards,
                          Eigen::VectorXf& terminal) const {
  const auto n = static_cast<Eigen::Index>(slots.size());
  states.local.resize(local_.rows(), n);
  states.global.resize(global_.rows(), n);
  states.budget.resize(1, n);
  next_states.local.resize(local_.rows(), n);
  next_states.global.resize(global_.rows(), n);
  next_states.budget.resize(1, n);
  actions.resize(slots.size());
  rewards.resize(n);
  terminal.resize(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto i = static_cast<Eigen::Index>(slots[static_cast<std::size_t>(b)]);
    states.local.col(b) = local_.col(i);
    states.global.col(b) = global_.col(i);
    states.budget(0, b) = budget_(i);
    next_states.local.col(b) = next_local_.col(i);
    next_states.global.col(b) = next_global_.col(i);
    next_states.budget(0, b) = next_budget_(i);
    actions[static_cast<std::size_t>(b)] = action_[static_cast<std::size_t>(i)];
    rewards(b) = reward_(i);
    terminal(b) = terminal_(i);
  }
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("train.gamma must be in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("train.tau must be in [0, 1]");
  if (!(lambda > 0.0)) throw std::invalid_argument("train.lambda must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("train.alpha must be > 0");
  if (batch < 1) throw std::invalid_argument("train.batch must be >= 1");
  if (buffer < static_cast<std::size_t>(batch)) throw std::invalid_argument("train.buffer must be >= train.batch");
  if (n_steps < 0) throw std::invalid_argument("train.n_steps must be >= 0");
  if (n_val < 1) throw std::invalid_argument("train.n_val must be >= 1");
  if (!(fill_fraction >= 0.0 && fill_fraction <= 1.0)) throw std::invalid_argument("train.fill_fraction must be in [0, 1]");
  if (val_interval < 1) throw std::invalid_argument("train.val_interval must be >= 1");
  if (parallel_envs < 1) throw std::invalid_argument("train.parallel_envs must be >= 1");
  if (train_every < 1) throw std::invalid_argument("train.train_every must be >= 1");
  if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("train.max_grad_norm must be >= 0");
}

Learner::Learner(const nn::QNetworkSpec& spec, nn::Vector<float> initial, double alpha, std::uint64_t seed)
    : net(spec),
      policy(std::move(initial)),
      target(policy),
      adam(policy.size(), alpha),
      minibatch_rng(seed, StreamId::kMinibatch) {}

std::vector<std::size_t> sample_slots(std::size_t fill, std::size_t count, RngStream& rng) {
  if (count > fill) throw std::logic_error("sample_slots: not enough transitions");
  // Floyd's algorithm: exactly `count` draws, no duplicates.
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> sorted;
  chosen.reserve(count);
  sorted.reserve(count);
  for (std::size_t j = fill - count; j < fill; ++j) {
    std::size_t t = rng.next_index(j + 1);
    auto pos = std::lower_bound(sorted.begin(), sorted.end(), t);
    if (pos != sorted.end() && *pos == t) {
      t = j;
      pos = std::lower_bound(sorted.begin(), sorted.end(), t);
    }
    sorted.insert(pos, t);
    chosen.push_back(t);
  }
  return chosen;
}

double train_step(const ReplayBuffer& buffer, Learner& learner, const TrainConfig& cfg) {
  const auto batch_size = static_cast<std::size_t>(cfg.batch);
  if (buffer.size() < batch_size) throw std::logic_error("train_step: replay buffer holds fewer than n_batch transitions");
  const std::vector<std::size_t> slots = sample_slots(buffer.size(), batch_size, learner.minibatch_rng);

  std::vector<int> actions;
  Eigen::VectorXf rewards, terminal;
  buffer.gather(slots, learner.states, learner.next_states, actions, rewards, terminal);

  const nn::Matrix<float> next_q = learner.net.forward(learner.target, learner.next_states, learner.target_cache);
  nn::ForwardCache<float>& cache = learner.policy_cache;
  const nn::Matrix<float> q = learner.net.forward(learner.policy, learner.states, cache);

  nn::Matrix<float> upstream = nn::Matrix<float>::Zero(q.rows(), q.cols());
  double loss = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch_size);
  for (Eigen::Index b = 0; b < q.cols(); ++b) {
    const int a = actions[static_cast<std::size_t>(b)];
    const double y = td_target(rewards(b), next_q.col(b), cfg.gamma, terminal(b) != 0.0f);
    const nn::LossValue l = nn::smooth_l1(q(a, b), y);
    loss += l.loss;
    upstream(a, b) = static_cast<float>(l.grad * inv_batch);
  }
  nn::Vector<float> grad = learner.net.backward(learner.policy, cache, upstream);
  if (cfg.max_grad_norm > 0.0) {
    const double norm = grad.cast<double>().norm();
    if (norm > cfg.max_grad_norm) grad *= static_cast<float>(cfg.max_grad_norm / norm);
  }
  nn::adam_step(learner.policy, grad, learner.adam);
  soft_update(learner.target, learner.policy, cfg.tau);
  return loss * inv_batch;
}

std::vector<std::uint64_t> validation_seeds(std::uint64_t seed, int n_val) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_val));
  const std::uint64_t base = derive_seed(seed, 0x7a11da7e);
  for (int i = 0; i < n_val; ++i) seeds[static_cast<std::size_t>(i)] = derive_seed(base, static_cast<std::uint64_t>(i));
  return seeds;
}

namespace {

struct Actor {
  Actor(Environment e, std::uint64_t seed)
      : env(std::move(e)), exploration(seed, StreamId::kExploration), episodes(seed, StreamId::kEpisodeSeeds) {}

  Environment env;
  RngStream exploration;
  RngStream episodes;
  Observation obs;
  nn::ForwardCache<float> cache;
  // Outcome of the current tick.
  Observation prev_obs;
  Action action = Action::kNorth;
  double reward = 0.0;
  bool done = false;
  bool active = false;
};

void act(Actor& actor, const nn::QNetwork<float>& net, const nn::Vector<float>& params, double lambda) {
  const Eigen::VectorXd q = net.forward(params, make_batch(actor.obs), actor.cache).col(0).cast<double>();
  actor.action = softmax_action(q, lambda, actor.exploration);
  StepResult res = actor.env.step(actor.action);
  actor.reward = res.reward;
  actor.done = res.done;
  actor.prev_obs = std::move(actor.obs);
  actor.obs = std::move(res.obs);
}

// Runs `work(i)` for every active actor index, on worker threads when asked.
class ActorPool {
 public:
  ActorPool(std::size_t actors, bool threaded) : actors_(actors) {
    if (!threaded || actors < 2) return;
    const std::size_t workers = std::min<std::size_t>(actors, std::max(1u, std::thread::hardware_concurrency()));
    if (workers < 2) return;
    sync_ = std::make_unique<std::barrier<>>(static_cast<std::ptrdiff_t>(workers + 1));
    for (std::size_t w = 0; w < workers; ++w) {
      threads_.emplace_back([this, w, workers] {
        for (;;) {
          sync_->arrive_and_wait();
          if (stop_) return;
          for (std::size_t i = w; i < actors_; i += workers) (*work_)(i);
          sync_->arrive_and_wait();
        }
      });
    }
  }

  ~ActorPool() {
    if (threads_.empty()) return;
    stop_ = true;
    sync_->arrive_and_wait();
    for (auto& t : threads_) t.join();
  }

  void run(const std::function<void(std::size_t)>& work) {
    if (threads_.empty()) {
      for (std::size_t i = 0; i < actors_; ++i) work(i);
      return;
    }
    work_ = &work;
    sync_->arrive_and_wait();
    sync_->arrive_and_wait();
  }

 private:
  std::size_t actors_;
  std::vector<std::thread> threads_;
  std::unique_ptr<std::barrier<>> sync_;
  const std::function<void(std::size_t)>* work_ = nullptr;
  bool stop_ = false;
};

struct Validation {
  double mean_reward = 0.0;
  double mean_found = 0.0;
};

Validation validate(Environment& env, const nn::QNetwork<float>& net, const nn::Vector<float>& params,
                    const std::vector<std::uint64_t>& seeds) {
  GreedyQPolicy policy(net, params);
  Validation v;
  for (std::uint64_t s : seeds) {
    const EpisodeLog log = run_episode(env, policy, s);
    v.mean_reward += log.reward_sum;
    v.mean_found += log.found_fraction;
  }
  v.mean_reward /= static_cast<double>(seeds.size());
  v.mean_found /= static_cast<double>(seeds.size());
  return v;
}

}  // namespace

TrainResult training_loop(const EnvFactory& make_env, const nn::QNetworkSpec& spec, const TrainConfig& cfg,
                          std::uint64_t seed, const std::function<void(const HistoryEntry&)>& on_validation) {
  cfg.validate();
  RngStream init_rng(seed, StreamId::kInit);
  Learner learner(spec, nn::init_params<float>(spec, init_rng).values, cfg.alpha, seed);

  TrainResult result;
  result.best_params = learner.policy;
  result.final_params = learner.policy;
  if (cfg.n_steps == 0) return result;

  std::vector<Actor> actors;
  actors.reserve(static_cast<std::size_t>(cfg.parallel_envs));
  for (int i = 0; i < cfg.parallel_envs; ++i) {
    const std::uint64_t actor_seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(i));
    Actor a(make_env(i), actor_seed);
    a.obs = a.env.reset(a.episodes.next_u64());
    actors.push_back(std::move(a));
  }
  Environment val_env = make_env(-1);
  const std::vector<std::uint64_t> val_seeds = validation_seeds(seed, cfg.n_val);
  if (val_env.config().action_count() != spec.action_count()) {
    throw std::invalid_argument("training_loop: network action count does not match the environment");
  }

  const Observation& probe = actors.front().obs;
  ReplayBuffer buffer(cfg.buffer, probe.local.size(), probe.global.size());
  const auto warmup = static_cast<std::size_t>(
      std::max<double>(static_cast<double>(cfg.batch), std::ceil(cfg.fill_fraction * static_cast<double>(cfg.buffer))));

  ActorPool pool(actors.size(), !cfg.single_threaded);
  long pending = 0;
  double loss_sum = 0.0;
  long loss_count = 0;
  bool have_best = false;

  auto run_validation = [&] {
    const Validation v = validate(val_env, learner.net, learner.policy, val_seeds);
    HistoryEntry e{result.env_steps, result.learner_steps, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0,
                   v.mean_reward, v.mean_found};
    loss_sum = 0.0;
    loss_count = 0;
    result.history.push_back(e);
    if (!have_best || v.mean_reward > result.best_val_reward) {
      have_best = true;
      result.best_val_reward = v.mean_reward;
      result.best_learner_step = result.learner_steps;
      result.best_params = learner.policy;
    }
    if (on_validation) on_validation(e);
  };

  const std::function<void(std::size_t)> step_actor = [&](std::size_t i) {
    if (actors[i].active) act(actors[i], learner.net, learner.policy, cfg.lambda);
  };

  while (result.env_steps < cfg.n_steps) {
    const long remaining = cfg.n_steps - result.env_steps;
    for (std::size_t i = 0; i < actors.size(); ++i) actors[i].active = static_cast<long>(i) < remaining;
    pool.run(step_actor);

    long stepped = 0;
    for (Actor& a : actors) {
      if (!a.active) continue;
      buffer.push(a.prev_obs, a.action, a.reward, a.obs, a.done);
      ++stepped;
      if (a.done) {
        ++result.episodes;
        a.obs = a.env.reset(a.episodes.next_u64());
      }
    }
    result.env_steps += stepped;

    if (buffer.size() < warmup) continue;
    pending += stepped;
    while (pending >= cfg.train_every) {
      pending -= cfg.train_every;
      loss_sum += train_step(buffer, learner, cfg);
      ++loss_count;
      ++result.learner_steps;
      if (result.learner_steps % cfg.val_interval == 0) run_validation();
    }
  }
  if (result.learner_steps > 0 &&
      (result.history.empty() || result.history.back().learner_step != result.learner_steps)) {
    run_validation();
  }
  result.final_params = learner.policy;
  return result;
}

}  // namespace uavsearch
