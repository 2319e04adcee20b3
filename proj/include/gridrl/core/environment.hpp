#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "gridrl/core/errors.hpp"

namespace gridrl {

template <class Obs>
struct Step {
  Obs observation;
  double reward = 0.0;
  bool terminal = false;
};

/// Episodic environment. The public reset/step pair enforces the episode
/// protocol; subclasses implement do_reset/do_step.
template <class Obs>
class Environment {
 public:
  using Observation = Obs;

  virtual ~Environment() = default;

  Obs reset() {
    Obs obs = do_reset();
    active_ = true;
    return obs;
  }

  Obs reset(std::uint64_t seed) {
    reseed(seed);
    return reset();
  }

  Step<Obs> step(std::size_t action) {
    if (!active_) throw UsageError("step called on a finished episode; call reset() first");
    if (action >= action_count()) {
      throw ParameterError("action " + std::to_string(action) + " out of range [0, " +
                           std::to_string(action_count()) + ")");
    }
    Step<Obs> s = do_step(action);
    if (s.terminal) active_ = false;
    return s;
  }

  bool active() const { return active_; }

  virtual std::size_t action_count() const = 0;
  virtual void reseed(std::uint64_t seed) = 0;

 protected:
  virtual Obs do_reset() = 0;
  virtual Step<Obs> do_step(std::size_t action) = 0;

 private:
  bool active_ = false;
};

/// Fully observable environment whose observations are state indices.
class DiscreteEnvironment : public Environment<std::size_t> {
 public:
  virtual std::size_t state_count() const = 0;
};

}  // namespace gridrl
