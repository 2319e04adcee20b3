#pragma once

#include <cstdint>
#include <vector>

#include "gridrl/core/mdp.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

/// Fixed-capacity FIFO of transitions. Once full, each push overwrites the
/// oldest entry.
template <class Obs>
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 10000) : capacity_(capacity) {
    if (capacity == 0) throw ParameterError("ReplayMemory: capacity must be positive");
    buffer_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition<Obs> t) {
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(t));
    } else {
      buffer_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
    ++insert_count_;
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return buffer_.empty(); }
  std::uint64_t insert_count() const { return insert_count_; }

  /// i-th entry counting from the oldest.
  const Transition<Obs>& in_order(std::size_t i) const {
    if (i >= size()) throw ParameterError("ReplayMemory: index out of range");
    return buffer_[size() < capacity_ ? i : (next_ + i) % capacity_];
  }

  /// n independent uniform draws with replacement, as storage slots.
  std::vector<std::size_t> sample_slots(std::size_t n, Rng& rng) const {
    if (size() < n || empty()) {
      throw UsageError("ReplayMemory: cannot sample " + std::to_string(n) + " from " + std::to_string(size()) +
                       " stored transitions");
    }
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = uniform_index(rng, size());
    return out;
  }

  const Transition<Obs>& slot(std::size_t i) const { return buffer_.at(i); }

  std::vector<Transition<Obs>> sample(std::size_t n, Rng& rng) const {
    std::vector<Transition<Obs>> out;
    out.reserve(n);
    for (std::size_t i : sample_slots(n, rng)) out.push_back(buffer_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition<Obs>> buffer_;
  std::size_t next_ = 0;
  std::uint64_t insert_count_ = 0;
};

}  // namespace gridrl
