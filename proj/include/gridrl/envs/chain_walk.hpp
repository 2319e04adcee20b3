#pragma once

#include <cstdint>

#include "gridrl/core/environment.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

/// A corridor of length+1 states. States 0 and `length` are terminal, the
/// agent starts at length/2, and entering the right end pays reward_right.
/// With probability slip_prob the chosen direction is inverted.
struct ChainWalk {
  std::size_t length = 5;
  double reward_right = 1.0;
  double slip_prob = 0.0;

  static constexpr std::size_t kLeft = 0;
  static constexpr std::size_t kRight = 1;

  void validate() const {
    if (length < 2) throw ValidationError("ChainWalk: length must be at least 2");
    if (!(slip_prob >= 0.0 && slip_prob < 0.5)) throw ValidationError("ChainWalk: slip_prob must lie in [0, 0.5)");
  }
  std::size_t state_count() const { return length + 1; }
  std::size_t start_state() const { return length / 2; }
  bool is_terminal(std::size_t s) const { return s == 0 || s == length; }
};

inline TabularMdp chain_as_tabular(const ChainWalk& chain, double discount) {
  chain.validate();
  const std::size_t n = chain.state_count();
  std::vector<double> probs(n * 2 * n, 0.0);
  std::vector<double> rewards(n * 2, 0.0);
  for (std::size_t s = 1; s < chain.length; ++s) {
    for (std::size_t a : {ChainWalk::kLeft, ChainWalk::kRight}) {
      const std::size_t intended = (a == ChainWalk::kRight) ? s + 1 : s - 1;
      const std::size_t slipped = (a == ChainWalk::kRight) ? s - 1 : s + 1;
      probs[(s * 2 + a) * n + intended] += 1.0 - chain.slip_prob;
      probs[(s * 2 + a) * n + slipped] += chain.slip_prob;
      const double p_right_end = (intended == chain.length ? 1.0 - chain.slip_prob : 0.0) +
                                 (slipped == chain.length ? chain.slip_prob : 0.0);
      rewards[s * 2 + a] = p_right_end * chain.reward_right;
    }
  }
  return TabularMdp(n, 2, std::move(probs), std::move(rewards), chain.start_state(), discount,
                    {0, chain.length});
}

class ChainWalkEnv : public DiscreteEnvironment {
 public:
  explicit ChainWalkEnv(ChainWalk chain, std::uint64_t seed = 0) : chain_(chain), rng_(seed) { chain_.validate(); }

  std::size_t action_count() const override { return 2; }
  std::size_t state_count() const override { return chain_.state_count(); }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }
  const ChainWalk& chain() const { return chain_; }

 protected:
  std::size_t do_reset() override {
    state_ = chain_.start_state();
    return state_;
  }

  Step<std::size_t> do_step(std::size_t action) override {
    bool right = action == ChainWalk::kRight;
    if (chain_.slip_prob > 0.0 && bernoulli(rng_, chain_.slip_prob)) right = !right;
    state_ = right ? state_ + 1 : state_ - 1;
    const double reward = (state_ == chain_.length) ? chain_.reward_right : 0.0;
    return {state_, reward, chain_.is_terminal(state_)};
  }

 private:
  ChainWalk chain_;
  Rng rng_;
  std::size_t state_ = 0;
};

}  // namespace gridrl
