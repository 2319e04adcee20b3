#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <vector>

#include "gridrl/a3c/grad_log.hpp"
#include "gridrl/approx/optim.hpp"

namespace gridrl {

enum class StoreMode {
  /// Snapshot and apply lock the whole parameter set.
  coarse,
  /// Each tensor has its own lock, so a snapshot may mix tensors from
  /// different updates. Mirrors lock-free practice; not bit-reproducible.
  per_tensor,
};

/// Parameters and RMSProp statistics shared by all workers.
template <class T>
class SharedStore {
 public:
  explicit SharedStore(ParameterSet<T> params, StoreMode mode = StoreMode::coarse)
      : mode_(mode), params_(std::move(params)), stats_(params_.zeros_like()) {
    for (std::size_t i = 0; i < params_.size(); ++i) tensor_locks_.push_back(std::make_unique<std::mutex>());
  }

  SharedStore(const SharedStore&) = delete;
  SharedStore& operator=(const SharedStore&) = delete;

  StoreMode mode() const { return mode_; }

  /// Every applied gradient is appended to `log` in application order.
  void attach_log(GradientLogWriter* log) { log_ = log; }

  void snapshot_into(ParameterSet<T>& local) const {
    if (mode_ == StoreMode::coarse) {
      std::lock_guard lock(mutex_);
      local = params_;
      return;
    }
    if (!local.same_layout(params_)) {
      std::lock_guard lock(mutex_);
      local = params_.zeros_like();
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      std::lock_guard lock(*tensor_locks_[i]);
      local[i].storage() = params_[i].storage();
    }
    local.set_version(local.version() + 1);
  }

  ParameterSet<T> snapshot() const {
    ParameterSet<T> out;
    snapshot_into(out);
    return out;
  }

  /// Seeds the RMSProp statistics, e.g. when resuming from a checkpoint.
  void set_stats(const ParameterSet<T>& stats) {
    if (!stats.same_layout(params_)) throw ShapeError("SharedStore: statistics layout does not match parameters");
    std::lock_guard lock(mutex_);
    stats_ = stats;
  }

  ParameterSet<T> stats() const {
    std::lock_guard lock(mutex_);
    if (mode_ == StoreMode::coarse) return stats_;
    ParameterSet<T> out = stats_.zeros_like();
    for (std::size_t i = 0; i < stats_.size(); ++i) {
      std::lock_guard tl(*tensor_locks_[i]);
      out[i].storage() = stats_[i].storage();
    }
    return out;
  }

  /// One RMSProp step with the shared statistics. Returns the number of
  /// applications completed including this one.
  std::uint64_t apply(const ParameterSet<T>& grads, const RmsPropConfig& config, std::uint32_t worker = 0) {
    check_rmsprop_config(config);
    if (!grads.same_layout(params_)) throw ShapeError("SharedStore: gradient layout does not match parameters");
    if (mode_ == StoreMode::coarse) {
      std::lock_guard lock(mutex_);
      rmsprop_step(params_, grads, stats_, config);
      if (log_) log_->append(worker, config.learning_rate, grads);
      return ++apply_count_;
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      std::lock_guard lock(*tensor_locks_[i]);
      rmsprop_tensor_step(params_[i], grads[i], stats_[i], config);
    }
    std::lock_guard lock(mutex_);
    params_.bump_version();
    if (log_) log_->append(worker, config.learning_rate, grads);
    return ++apply_count_;
  }

  std::uint64_t apply_count() const { return apply_count_.load(); }

 private:
  StoreMode mode_;
  mutable std::mutex mutex_;
  std::vector<std::unique_ptr<std::mutex>> tensor_locks_;
  ParameterSet<T> params_;
  ParameterSet<T> stats_;
  std::atomic<std::uint64_t> apply_count_{0};
  GradientLogWriter* log_ = nullptr;
};

}  // namespace gridrl
