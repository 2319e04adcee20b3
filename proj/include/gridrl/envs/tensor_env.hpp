#pragma once

#include <memory>

#include "gridrl/approx/tensor.hpp"
#include "gridrl/core/environment.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

/// Environment whose observations are fixed-shape real tensors, the form
/// function approximators consume.
template <class T>
class TensorEnvironment : public Environment<Tensor<T>> {
 public:
  virtual Shape observation_shape() const = 0;
};

/// Presents a discrete environment's state index as a one-hot vector. An
/// optional step limit ends long episodes; the truncating step is reported
/// as terminal.
template <class T>
class OneHotEnvironment final : public TensorEnvironment<T> {
 public:
  explicit OneHotEnvironment(std::unique_ptr<DiscreteEnvironment> inner, std::size_t step_limit = 0)
      : inner_(std::move(inner)), step_limit_(step_limit) {
    if (!inner_) throw ParameterError("OneHotEnvironment: null inner environment");
  }

  std::size_t action_count() const override { return inner_->action_count(); }
  void reseed(std::uint64_t seed) override { inner_->reseed(seed); }
  Shape observation_shape() const override { return {inner_->state_count()}; }
  std::size_t state() const { return state_; }
  DiscreteEnvironment& inner() { return *inner_; }

 protected:
  Tensor<T> do_reset() override {
    steps_ = 0;
    state_ = inner_->reset();
    return one_hot<T>(state_, inner_->state_count());
  }

  Step<Tensor<T>> do_step(std::size_t action) override {
    const auto s = inner_->step(action);
    state_ = s.observation;
    ++steps_;
    const bool truncated = step_limit_ > 0 && steps_ >= step_limit_;
    return {one_hot<T>(state_, inner_->state_count()), s.reward, s.terminal || truncated};
  }

 private:
  std::unique_ptr<DiscreteEnvironment> inner_;
  std::size_t step_limit_;
  std::size_t steps_ = 0;
  std::size_t state_ = 0;
};

/// One-step bandit as an MDP: state 0 pulls an arm and moves to the absorbing
/// state 1 with the arm's payoff.
inline TabularMdp bandit_mdp(const std::vector<double>& payoffs, double discount = 0.0) {
  const std::size_t k = payoffs.size();
  if (k == 0) throw ValidationError("bandit_mdp: at least one arm is required");
  std::vector<double> probs(2 * k * 2, 0.0);
  std::vector<double> rewards(2 * k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    probs[(0 * k + a) * 2 + 1] = 1.0;
    rewards[a] = payoffs[a];
  }
  return TabularMdp(2, k, std::move(probs), std::move(rewards), 0, discount, {1});
}

/// Two contexts drawn uniformly at reset; choosing the action equal to the
/// context pays `reward`, anything else pays 0. Episodes last one step.
class ContextualBandit final : public DiscreteEnvironment {
 public:
  explicit ContextualBandit(std::size_t contexts = 2, double reward = 1.0, std::uint64_t seed = 0)
      : contexts_(contexts), reward_(reward), rng_(seed) {
    if (contexts < 2) throw ValidationError("ContextualBandit: at least two contexts are required");
  }

  std::size_t action_count() const override { return contexts_; }
  std::size_t state_count() const override { return contexts_; }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

 protected:
  std::size_t do_reset() override {
    context_ = uniform_index(rng_, contexts_);
    return context_;
  }
  Step<std::size_t> do_step(std::size_t action) override {
    return {context_, action == context_ ? reward_ : 0.0, true};
  }

 private:
  std::size_t contexts_;
  double reward_;
  Rng rng_;
  std::size_t context_ = 0;
};

/// Two-step recall task. Step 0 shows one of two cues (states 0 and 1); the
/// action taken there is ignored. Step 1 shows the blank state 2, and the
/// episode pays 1 if that action names the cue. Without memory of step 0 no
/// policy beats one half.
class MemoryCue final : public DiscreteEnvironment {
 public:
  static constexpr std::size_t kBlank = 2;

  explicit MemoryCue(std::uint64_t seed = 0) : rng_(seed) {}

  std::size_t action_count() const override { return 2; }
  std::size_t state_count() const override { return 3; }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }
  std::size_t cue() const { return cue_; }

 protected:
  std::size_t do_reset() override {
    cue_ = uniform_index(rng_, 2);
    t_ = 0;
    return cue_;
  }
  Step<std::size_t> do_step(std::size_t action) override {
    if (t_++ == 0) return {kBlank, 0.0, false};
    return {kBlank, action == cue_ ? 1.0 : 0.0, true};
  }

 private:
  Rng rng_;
  std::size_t cue_ = 0;
  int t_ = 0;
};

}  // namespace gridrl
