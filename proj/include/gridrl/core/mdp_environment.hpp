#pragma once

#include <optional>

#include "gridrl/core/environment.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

/// Samples trajectories from an explicit TabularMdp. Reaching a terminal
/// state ends the episode.
class MdpEnvironment : public DiscreteEnvironment {
 public:
  explicit MdpEnvironment(TabularMdp mdp, std::uint64_t seed = 0) : mdp_(std::move(mdp)), rng_(seed) {}

  std::size_t action_count() const override { return mdp_.n_actions(); }
  std::size_t state_count() const override { return mdp_.n_states(); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

  /// Start states other than the MDP's own initial state (exploring starts).
  void set_start_state(std::size_t s) { start_ = s; }
  std::size_t state() const { return state_; }
  const TabularMdp& mdp() const { return mdp_; }

 protected:
  std::size_t do_reset() override {
    state_ = start_.value_or(mdp_.initial_state());
    return state_;
  }

  Step<std::size_t> do_step(std::size_t action) override {
    const double r = mdp_.reward(state_, action);
    state_ = sample_discrete(rng_, mdp_.next_state_probs(state_, action));
    return {state_, r, mdp_.is_terminal(state_)};
  }

 private:
  TabularMdp mdp_;
  Rng rng_;
  std::optional<std::size_t> start_;
  std::size_t state_ = 0;
};

}  // namespace gridrl
