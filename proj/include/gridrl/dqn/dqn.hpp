#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridrl/approx/network.hpp"
#include "gridrl/approx/optim.hpp"
#include "gridrl/dqn/replay.hpp"
#include "gridrl/tabular/epsilon.hpp"

namespace gridrl {

inline constexpr const char* kQHead = "q_values";

struct DqnConfig {
  std::size_t batch_size = 64;
  std::size_t replay_capacity = 10000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  std::uint64_t anneal_steps = 2000000;
  /// Observations collected with epsilon_start before training and annealing begin.
  std::uint64_t warmup_observations = 10000;
  /// Updates between target copies. 1 copies after every update.
  std::uint64_t target_sync_interval = 1;
  double eval_epsilon = 0.05;
  double discount = 0.99;
  RmsPropConfig rmsprop{};
  double clip_threshold = 10.0;
  /// Decay the learning rate linearly to zero over the learner's observation budget.
  bool anneal_learning_rate = true;
  /// When false each update uses only the transition just observed.
  bool use_replay = true;

  void validate() const {
    if (batch_size == 0) throw ConfigError("dqn: batch_size must be positive");
    if (replay_capacity == 0) throw ConfigError("dqn: replay_capacity must be positive");
    if (use_replay && batch_size > replay_capacity) throw ConfigError("dqn: batch_size must not exceed replay_capacity");
    if (use_replay && warmup_observations < batch_size) throw ConfigError("dqn: warmup_observations must be >= batch_size");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= epsilon_start)) {
      throw ConfigError("dqn: need 0 <= epsilon_end <= epsilon_start <= 1");
    }
    if (!(eval_epsilon >= 0.0 && eval_epsilon <= 1.0)) throw ConfigError("dqn: eval_epsilon must lie in [0, 1]");
    if (anneal_steps == 0) throw ConfigError("dqn: anneal_steps must be positive");
    if (target_sync_interval == 0) throw ConfigError("dqn: target_sync_interval must be positive");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("dqn: discount must lie in [0, 1]");
    if (!(clip_threshold > 0.0)) throw ConfigError("dqn: clip threshold must be positive");
  }

  /// epsilon_start through warmup, then linear to epsilon_end over anneal_steps.
  /// Both endpoints are returned exactly.
  double epsilon_at(std::uint64_t observations) const {
    if (observations <= warmup_observations) return epsilon_start;
    const std::uint64_t t = observations - warmup_observations;
    if (t >= anneal_steps) return epsilon_end;
    return epsilon_start + (epsilon_end - epsilon_start) * (static_cast<double>(t) / static_cast<double>(anneal_steps));
  }
};

template <class T>
std::vector<double> q_values(const Network<T>& net, const ParameterSet<T>& params, const Tensor<T>& obs) {
  const auto out = net.forward(params, obs).outputs[net.head_index(kQHead)];
  return {out.values().begin(), out.values().end()};
}

/// Epsilon-greedy over the Q head (lowest index wins ties).
template <class T>
std::size_t act(const Network<T>& net, const ParameterSet<T>& params, const Tensor<T>& obs, double epsilon, Rng& rng) {
  return epsilon_greedy_action(q_values(net, params, obs), epsilon, rng);
}

/// y_i = r_i for terminal transitions, else r_i + discount * max_a Q_target(x'_i, a).
template <class T>
std::vector<double> dqn_targets(std::span<const Transition<Tensor<T>>* const> batch, const ParameterSet<T>& target,
                                const Network<T>& net, double discount) {
  if (batch.empty()) throw ParameterError("dqn_targets: empty batch");
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto* t : batch) {
    if (t->terminal) {
      y.push_back(t->reward);
      continue;
    }
    const auto q = q_values(net, target, t->obs_after);
    y.push_back(t->reward + discount * *std::max_element(q.begin(), q.end()));
  }
  return y;
}

template <class T>
std::vector<double> dqn_targets(std::span<const Transition<Tensor<T>>> batch, const ParameterSet<T>& target,
                                const Network<T>& net, double discount) {
  std::vector<const Transition<Tensor<T>>*> ptrs;
  for (const auto& t : batch) ptrs.push_back(&t);
  return dqn_targets<T>(std::span<const Transition<Tensor<T>>* const>(ptrs), target, net, discount);
}

template <class T>
struct DqnLoss {
  ParameterSet<T> gradients;
  double loss = 0.0;
};

/// Loss (1/2B) sum_i (Q(x_i, a_i) - y_i)^2 and its gradient; only the taken
/// action's output receives gradient.
template <class T>
DqnLoss<T> dqn_loss(const Network<T>& net, const ParameterSet<T>& params,
                    std::span<const Transition<Tensor<T>>* const> batch, std::span<const double> targets) {
  if (batch.size() != targets.size()) throw ShapeError("dqn_loss: one target per transition");
  const std::size_t qh = net.head_index(kQHead);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  DqnLoss<T> out{net.zero_gradients(), 0.0};
  std::vector<Tensor<T>> head_grads(net.head_count());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto fr = net.forward(params, batch[i]->obs_before);
    const auto& q = fr.outputs[qh];
    const std::size_t a = batch[i]->action;
    if (a >= q.size()) throw ParameterError("dqn_loss: action out of range");
    const double delta = static_cast<double>(q[a]) - targets[i];
    out.loss += 0.5 * inv_b * delta * delta;
    head_grads[qh] = Tensor<T>(q.shape());
    head_grads[qh][a] = static_cast<T>(delta * inv_b);
    net.backward_into(params, fr.cache, head_grads, out.gradients);
  }
  return out;
}

struct DqnDiagnostics {
  bool updated = false;
  bool synced = false;
  double loss = 0.0;
  double epsilon = 1.0;
  double clip_fraction = 0.0;
  double learning_rate = 0.0;
};

/// Online network, target snapshot, replay memory and optimizer state of one
/// DQN agent. `total_observations` is the horizon of the learning-rate decay.
template <class T>
class DqnLearner {
 public:
  DqnLearner(const Network<T>& net, ParameterSet<T> params, DqnConfig config, std::uint64_t seed,
             std::uint64_t total_observations = 0)
      : net_(&net),
        config_(std::move(config)),
        params_(std::move(params)),
        memory_(config_.replay_capacity),
        rng_(seed),
        total_observations_(total_observations) {
    config_.validate();
    net.check_parameters(params_);
    net.head_index(kQHead);
    target_ = params_;
    stats_ = params_.zeros_like();
  }

  const DqnConfig& config() const { return config_; }
  const Network<T>& network() const { return *net_; }
  const ParameterSet<T>& params() const { return params_; }
  const ParameterSet<T>& target_params() const { return target_; }
  const ParameterSet<T>& optimizer_stats() const { return stats_; }
  const ReplayMemory<Tensor<T>>& memory() const { return memory_; }
  std::uint64_t observations() const { return observations_; }
  std::uint64_t updates() const { return updates_; }
  std::uint64_t last_sync_update() const { return last_sync_; }
  double epsilon() const { return config_.epsilon_at(observations_); }
  Rng& rng() { return rng_; }

  std::size_t act(const Tensor<T>& obs) { return gridrl::act(*net_, params_, obs, epsilon(), rng_); }

  /// Stores the transition, then (after warmup) performs one batched update.
  /// The target copy happens after the optimizer step, so with interval 1 the
  /// next update's targets use the weights of the previous step.
  DqnDiagnostics train_step(Transition<Tensor<T>> t) {
    memory_.push(std::move(t));
    ++observations_;
    DqnDiagnostics d;
    d.epsilon = epsilon();
    if (observations_ <= config_.warmup_observations) return d;
    // After a restore the memory refills before updates resume.
    if (config_.use_replay && memory_.size() < config_.batch_size) return d;

    std::vector<const Transition<Tensor<T>>*> batch;
    if (config_.use_replay) {
      for (std::size_t slot : memory_.sample_slots(config_.batch_size, rng_)) batch.push_back(&memory_.slot(slot));
    } else {
      batch.push_back(&memory_.in_order(memory_.size() - 1));
    }
    const auto targets = dqn_targets<T>(batch, target_, *net_, config_.discount);
    auto loss = dqn_loss<T>(*net_, params_, batch, targets);
    d.loss = loss.loss;
    d.clip_fraction = clip_gradients(loss.gradients, static_cast<T>(config_.clip_threshold));
    RmsPropConfig rms = config_.rmsprop;
    if (config_.anneal_learning_rate && total_observations_ > 0) {
      rms.learning_rate = linear_lr(rms.learning_rate, observations_, total_observations_);
    }
    d.learning_rate = rms.learning_rate;
    rmsprop_step(params_, loss.gradients, stats_, rms);
    ++updates_;
    d.updated = true;
    if (updates_ % config_.target_sync_interval == 0) {
      target_ = params_;
      last_sync_ = updates_;
      d.synced = true;
    }
    return d;
  }

  /// Restores optimizer-visible state from a checkpoint. The replay memory
  /// starts empty; warmup is not repeated.
  void restore(const ParameterSet<T>& params, const ParameterSet<T>& stats, std::uint64_t observations,
               std::uint64_t updates) {
    net_->check_parameters(params);
    if (!stats.same_layout(params)) throw ShapeError("DqnLearner: optimizer statistics do not match parameters");
    params_ = params;
    stats_ = stats;
    target_ = params;
    observations_ = observations;
    updates_ = updates;
    last_sync_ = updates;
  }

  void set_total_observations(std::uint64_t total) { total_observations_ = total; }

 private:
  const Network<T>* net_;
  DqnConfig config_;
  ParameterSet<T> params_;
  ParameterSet<T> target_;
  ParameterSet<T> stats_;
  ReplayMemory<Tensor<T>> memory_;
  Rng rng_;
  std::uint64_t total_observations_ = 0;
  std::uint64_t observations_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t last_sync_ = 0;
};

}  // namespace gridrl
