#pragma once

#include <memory>

#include "gridrl/envs/tensor_env.hpp"
#include "gridrl/preprocess/history.hpp"

namespace gridrl {

/// Environment that emits frames; `frame_shape` is {height, width, channels}.
class FrameEnvironment : public Environment<Frame> {
 public:
  virtual Shape frame_shape() const = 0;
};

struct PreprocessConfig {
  std::size_t downsample_factor = 2;
  bool delta = false;
  std::size_t history = 6;
  bool sign_rewards = true;

  void validate() const {
    if (downsample_factor < 1) throw ConfigError("preprocess: downsample_factor must be at least 1");
    if (history < 1) throw ConfigError("preprocess: history must be at least 1");
  }
};

/// Per-frame part of the pipeline: grayscale, downsample, then optionally the
/// delta against the previous processed frame (a zero frame at episode start).
class FramePipeline {
 public:
  explicit FramePipeline(PreprocessConfig config = {}) : config_(config) { config_.validate(); }

  const PreprocessConfig& config() const { return config_; }
  void begin_episode() { previous_.reset(); }

  Frame process(const Frame& raw) {
    raw.validate();
    Frame f = downsample(grayscale(raw), config_.downsample_factor);
    if (!config_.delta) return f;
    const Frame prev = previous_ ? *previous_ : Frame(f.height, f.width, 1);
    previous_ = f;
    return delta_frame(f, prev);
  }

  Shape output_shape(const Shape& frame_shape) const {
    if (frame_shape.size() != 3) throw ShapeError("preprocess: frame shape must be {height, width, channels}");
    if (frame_shape[0] % config_.downsample_factor || frame_shape[1] % config_.downsample_factor) {
      throw ShapeError("preprocess: frame size is not divisible by the downsample factor");
    }
    return {config_.history, frame_shape[0] / config_.downsample_factor, frame_shape[1] / config_.downsample_factor};
  }

 private:
  PreprocessConfig config_;
  std::optional<Frame> previous_;
};

/// Agent-facing view of a frame environment. One agent step repeats the action
/// for `history` frames and returns their stack with the summed reward, signed
/// when sign_rewards is set. reset() plays the first stack with one uniformly
/// drawn action. An episode ending mid-stack pads the stack with its last
/// frame. Should the inner episode end during the first stack, it is restarted
/// and the rewards it paid are dropped.
template <class T>
class StackedFrameEnvironment final : public TensorEnvironment<T> {
 public:
  StackedFrameEnvironment(std::unique_ptr<FrameEnvironment> inner, PreprocessConfig config = {})
      : inner_(std::move(inner)), pipeline_(config) {
    if (!inner_) throw ParameterError("StackedFrameEnvironment: null inner environment");
    shape_ = pipeline_.output_shape(inner_->frame_shape());
  }

  std::size_t action_count() const override { return inner_->action_count(); }
  Shape observation_shape() const override { return shape_; }
  void reseed(std::uint64_t seed) override {
    inner_->reseed(seed);
    rng_.seed(derive_seed(seed, 2));
  }

  FrameEnvironment& inner() { return *inner_; }
  /// Unsigned reward summed over the last agent step's frames.
  double last_raw_reward() const { return last_raw_; }
  /// Environment frames consumed in the current episode.
  std::size_t frames() const { return frames_; }

 protected:
  Tensor<T> do_reset() override {
    const std::size_t k = pipeline_.config().history;
    for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
      stack_.clear();
      carry_ = 0.0;
      frames_ = 1;
      pipeline_.begin_episode();
      stack_.push_back(pipeline_.process(inner_->reset()));
      const std::size_t a = uniform_index(rng_, inner_->action_count());
      bool ended = false;
      while (stack_.size() < k && !ended) {
        auto s = inner_->step(a);
        ++frames_;
        carry_ += s.reward;
        ended = s.terminal;
        stack_.push_back(pipeline_.process(s.observation));
      }
      if (!ended) return emit();
    }
    throw ValidationError("StackedFrameEnvironment: episodes keep ending before the first stack fills");
  }

  Step<Tensor<T>> do_step(std::size_t action) override {
    const std::size_t k = pipeline_.config().history;
    stack_.clear();
    double sum = carry_;
    carry_ = 0.0;
    bool terminal = false;
    while (stack_.size() < k && !terminal) {
      auto s = inner_->step(action);
      ++frames_;
      sum += s.reward;
      terminal = s.terminal;
      stack_.push_back(pipeline_.process(s.observation));
    }
    while (stack_.size() < k) stack_.push_back(stack_.back());
    last_raw_ = sum;
    return {emit(), pipeline_.config().sign_rewards ? sign_reward(sum) : sum, terminal};
  }

 private:
  static constexpr int kMaxRestarts = 1000;

  Tensor<T> emit() const {
    const auto stacked = HistoryStack::stack(stack_);
    Tensor<T> out(stacked.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(stacked[i]);
    return out;
  }

  std::unique_ptr<FrameEnvironment> inner_;
  FramePipeline pipeline_;
  Shape shape_;
  Rng rng_{0};
  std::vector<Frame> stack_;
  double carry_ = 0.0;
  double last_raw_ = 0.0;
  std::size_t frames_ = 0;
};

}  // namespace gridrl
