#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "gridrl/a3c/shared_store.hpp"
#include "gridrl/pg/actor_critic.hpp"

namespace gridrl {

struct WorkerConfig : ActorCriticConfig {
  std::size_t worker_count = 16;
  StoreMode store_mode = StoreMode::coarse;

  void validate() const {
    ActorCriticConfig::validate();
    if (worker_count < 1) throw ConfigError("a3c: worker_count must be at least 1");
  }
};

template <class T>
using EnvironmentFactory = std::function<std::unique_ptr<TensorEnvironment<T>>(std::size_t worker)>;

/// One rollout segment as the worker saw it, kept for inspection.
template <class T>
struct SegmentRecord {
  RecurrentState<T> start_state;
  std::vector<Transition<Tensor<T>>> transitions;
  std::vector<Tensor<T>> logits;
  std::uint64_t params_version = 0;
};

struct WorkerDiagnostics {
  std::size_t steps = 0;
  bool episode_ended = false;
  double entropy = 0.0;
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
  double learning_rate = 0.0;
  std::uint64_t apply_index = 0;
};

/// Worker-local state: environment, RNG, local parameter copy and recurrent
/// state. Seeds are base_seed + index for actions and
/// derive_seed(base_seed + index, 1) for the environment.
template <class T>
class A3cWorker {
 public:
  A3cWorker(std::size_t index, std::unique_ptr<TensorEnvironment<T>> env, const Network<T>& net,
            std::uint64_t base_seed)
      : index_(index), env_(std::move(env)), net_(&net), rng_(base_seed + index) {
    if (!env_) throw ParameterError("A3cWorker: null environment");
    policy_head_ = net.head_index(kPolicyHead);
    net.head_index(kValueHead);
    env_->reseed(derive_seed(base_seed + index, 1));
    obs_ = env_->reset();
    state_ = net.initial_state();
  }

  std::size_t index() const { return index_; }
  const RecurrentState<T>& state() const { return state_; }
  const SegmentRecord<T>& last_segment() const { return last_; }
  const std::vector<EpisodeRecord>& episodes() const { return episodes_; }

  /// Snapshot, roll out up to t_max steps, compute and clip the actor-critic
  /// gradient, apply it to the store, then refresh the local copy. Each
  /// environment step increments `observations` exactly once; the learning
  /// rate is annealed against that global count.
  WorkerDiagnostics iterate(SharedStore<T>& store, const WorkerConfig& config, std::atomic<std::uint64_t>& observations,
                            std::uint64_t total_observations, std::uint64_t anneal_horizon = 0) {
    store.snapshot_into(local_);
    last_.start_state = state_;
    last_.transitions.clear();
    last_.logits.clear();
    last_.params_version = local_.version();
    WorkerDiagnostics d;
    bool terminal = false;
    std::uint64_t count = 0;
    while (last_.transitions.size() < config.t_max && !terminal) {
      auto fr = net_->forward(local_, obs_, &state_);
      const std::size_t a = sample_action(policy_output(fr.outputs[policy_head_]), rng_);
      auto st = env_->step(a);
      count = observations.fetch_add(1) + 1;
      score_ += st.reward;
      ++length_;
      terminal = st.terminal;
      last_.logits.push_back(fr.outputs[policy_head_]);
      last_.transitions.push_back({obs_, a, st.reward, st.observation, st.terminal});
      state_ = std::move(fr.state);
      obs_ = std::move(st.observation);
    }
    d.steps = last_.transitions.size();
    const double bootstrap = terminal ? 0.0 : value_estimate(*net_, local_, obs_, state_);
    auto g = a2c_gradients<T>(last_.transitions, *net_, local_, config.discount, bootstrap, config.options(),
                              last_.start_state);
    d.entropy = g.entropy_sum;
    d.critic_loss = g.critic_loss;
    d.clip_fraction = clip_gradients(g.total, static_cast<T>(config.clip_threshold));
    RmsPropConfig rms = config.rmsprop;
    if (config.anneal_learning_rate) {
      rms.learning_rate =
          linear_lr(rms.learning_rate, observations.load(), anneal_horizon ? anneal_horizon : total_observations);
    }
    d.learning_rate = rms.learning_rate;
    d.apply_index = store.apply(g.total, rms, static_cast<std::uint32_t>(index_));
    store.snapshot_into(local_);
    if (terminal) {
      episodes_.push_back({index_, count, score_, length_});
      d.episode_ended = true;
      score_ = 0.0;
      length_ = 0;
      obs_ = env_->reset();
      state_ = net_->initial_state();
    }
    return d;
  }

 private:
  std::size_t index_;
  std::unique_ptr<TensorEnvironment<T>> env_;
  const Network<T>* net_;
  Rng rng_;
  std::size_t policy_head_ = 0;
  ParameterSet<T> local_;
  Tensor<T> obs_;
  RecurrentState<T> state_;
  SegmentRecord<T> last_;
  double score_ = 0.0;
  std::size_t length_ = 0;
  std::vector<EpisodeRecord> episodes_;
};

struct A3cOptions {
  /// Round-robin the workers on the calling thread instead of spawning
  /// threads; deterministic for a given seed.
  bool serialized = false;
  GradientLogWriter* gradient_log = nullptr;
  /// Continues a longer run: the global counter starts here, and the
  /// learning rate anneals over `anneal_horizon` (0 means the run's total).
  std::uint64_t observation_offset = 0;
  std::uint64_t anneal_horizon = 0;
};

template <class T>
struct A3cRun {
  ParameterSet<T> params;
  ParameterSet<T> stats;
  /// Sorted by (observation, worker).
  std::vector<EpisodeRecord> episodes;
  std::uint64_t observations = 0;
  std::uint64_t updates = 0;
  /// Set when a worker threw; the other fields then hold partial results.
  bool aborted = false;
  std::string error;
  /// Policy entropy summed over every rollout step, and the step count.
  double entropy_sum = 0.0;
  std::uint64_t steps = 0;
  /// Learning rate of the last applied update.
  double learning_rate = 0.0;
  std::uint64_t last_apply = 0;
};

namespace detail {

struct Accumulated {
  double entropy = 0.0;
  std::uint64_t steps = 0;
  double learning_rate = 0.0;
  std::uint64_t apply_index = 0;
  void add(const WorkerDiagnostics& d) {
    entropy += d.entropy;
    steps += d.steps;
    learning_rate = d.learning_rate;
    apply_index = d.apply_index;
  }
};

}  // namespace detail

/// Runs worker_count workers against one shared store until the global
/// observation counter reaches total_observations. A worker only starts an
/// iteration while the counter is below the budget, so the final count is
/// below total_observations + worker_count * t_max.
template <class T>
A3cRun<T> run_a3c(const WorkerConfig& config, const EnvironmentFactory<T>& make_env, const Network<T>& net,
                  ParameterSet<T> initial, std::uint64_t total_observations, std::uint64_t seed,
                  const A3cOptions& options = {}, const ParameterSet<T>* initial_stats = nullptr) {
  config.validate();
  net.check_parameters(initial);
  if (options.observation_offset > total_observations) throw ParameterError("run_a3c: offset beyond the budget");
  SharedStore<T> store(std::move(initial), config.store_mode);
  if (initial_stats) store.set_stats(*initial_stats);
  const std::uint64_t horizon = options.anneal_horizon ? options.anneal_horizon : total_observations;
  store.attach_log(options.gradient_log);
  std::vector<std::unique_ptr<A3cWorker<T>>> workers;
  for (std::size_t w = 0; w < config.worker_count; ++w) {
    workers.push_back(std::make_unique<A3cWorker<T>>(w, make_env(w), net, seed));
  }
  std::atomic<std::uint64_t> observations{options.observation_offset};
  std::vector<detail::Accumulated> totals(workers.size());
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::string error;
  auto fail = [&](const std::exception& e, std::size_t w) {
    std::lock_guard lock(error_mutex);
    if (error.empty()) error = "worker " + std::to_string(w) + ": " + e.what();
    abort = true;
  };

  if (options.serialized || config.worker_count == 1) {
    try {
      while (!abort && observations.load() < total_observations) {
        for (auto& w : workers) {
          if (observations.load() >= total_observations) break;
          try {
            totals[w->index()].add(w->iterate(store, config, observations, total_observations, horizon));
          } catch (const std::exception& e) {
            fail(e, w->index());
            break;
          }
        }
      }
    } catch (...) {
      abort = true;
    }
  } else {
    std::vector<std::thread> threads;
    for (auto& w : workers) {
      threads.emplace_back([&, worker = w.get()] {
        try {
          while (!abort && observations.load() < total_observations) {
            totals[worker->index()].add(worker->iterate(store, config, observations, total_observations, horizon));
          }
        } catch (const std::exception& e) {
          fail(e, worker->index());
        }
      });
    }
    for (auto& t : threads) t.join();
  }

  A3cRun<T> run;
  run.params = store.snapshot();
  run.stats = store.stats();
  run.observations = observations.load();
  run.updates = store.apply_count();
  for (const auto& w : workers) run.episodes.insert(run.episodes.end(), w->episodes().begin(), w->episodes().end());
  std::sort(run.episodes.begin(), run.episodes.end(), [](const EpisodeRecord& a, const EpisodeRecord& b) {
    return a.observation != b.observation ? a.observation < b.observation : a.worker < b.worker;
  });
  for (const auto& t : totals) {
    run.entropy_sum += t.entropy;
    run.steps += t.steps;
    if (t.apply_index > run.last_apply) {
      run.last_apply = t.apply_index;
      run.learning_rate = t.learning_rate;
    }
  }
  run.aborted = abort.load();
  run.error = error;
  return run;
}

}  // namespace gridrl
