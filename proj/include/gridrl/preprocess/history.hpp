#pragma once

#include <functional>
#include <optional>

#include "gridrl/approx/tensor.hpp"
#include "gridrl/core/random.hpp"
#include "gridrl/preprocess/frame.hpp"

namespace gridrl {

struct HistoryStep {
  /// Set on the frame that completes a stack: the last `depth` frames, oldest
  /// first, shape [depth][H][W].
  std::optional<Tensor<double>> observation;
  /// Action to play for the next environment step.
  std::size_t action = 0;
  bool agent_queried = false;
};

/// Collects non-overlapping stacks of `depth` grayscale frames. The agent is
/// consulted once per completed stack and its action repeats until the next
/// stack completes. During an episode's first stack the repeated action is a
/// single uniform draw.
class HistoryStack {
 public:
  using Agent = std::function<std::size_t(const Tensor<double>&)>;

  explicit HistoryStack(std::size_t depth = 6, std::size_t action_count = 7, std::uint64_t seed = 0)
      : depth_(depth), action_count_(action_count), rng_(seed) {
    if (depth < 1) throw ParameterError("HistoryStack: depth must be at least 1");
    if (action_count < 1) throw ParameterError("HistoryStack: action_count must be at least 1");
  }

  std::size_t depth() const { return depth_; }
  std::size_t filled() const { return frames_.size(); }
  std::size_t pending_action() const { return pending_; }
  bool in_first_stack() const { return first_stack_; }
  std::uint64_t queries() const { return queries_; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

  void begin_episode() {
    frames_.clear();
    first_stack_ = true;
    pending_ = uniform_index(rng_, action_count_);
  }

  /// `terminal` marks the episode's last frame; no action is needed after it,
  /// so a stack completed there is emitted without consulting the agent.
  HistoryStep step(const Frame& frame, const Agent& agent, bool terminal = false) {
    if (frame.channels != 1) throw ShapeError("HistoryStack: grayscale frames required");
    if (!frames_.empty() && !frames_.front().same_shape(frame)) throw ShapeError("HistoryStack: frame shape changed");
    frames_.push_back(frame);
    HistoryStep out;
    if (frames_.size() == depth_) {
      out.observation = stacked();
      frames_.clear();
      first_stack_ = false;
      if (!terminal) {
        const std::size_t a = agent(*out.observation);
        if (a >= action_count_) throw ParameterError("HistoryStack: agent chose an out-of-range action");
        pending_ = a;
        ++queries_;
        out.agent_queried = true;
      }
    }
    out.action = pending_;
    return out;
  }

  /// Stacks the given frames (oldest first) into [k][H][W].
  static Tensor<double> stack(const std::vector<Frame>& frames) {
    if (frames.empty()) throw ShapeError("HistoryStack: nothing to stack");
    const auto& f0 = frames.front();
    Tensor<double> out({frames.size(), f0.height, f0.width});
    std::size_t k = 0;
    for (const auto& f : frames) {
      if (!f.same_shape(f0) || f.channels != 1) throw ShapeError("HistoryStack: frames differ in shape");
      for (double v : f.pixels) out[k++] = v;
    }
    return out;
  }

 private:
  Tensor<double> stacked() const { return stack(frames_); }

  std::size_t depth_;
  std::size_t action_count_;
  Rng rng_;
  std::vector<Frame> frames_;
  std::size_t pending_ = 0;
  bool first_stack_ = true;
  std::uint64_t queries_ = 0;
};

}  // namespace gridrl
