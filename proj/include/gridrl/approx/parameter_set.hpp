#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridrl/approx/tensor.hpp"

namespace gridrl {

/// Named tensors in insertion order plus a version counter bumped by every
/// optimizer step.
template <class T>
class ParameterSet {
 public:
  std::size_t add(const std::string& name, Tensor<T> tensor) {
    if (index_.count(name)) throw ValidationError("ParameterSet: duplicate name '" + name + "'");
    index_.emplace(name, tensors_.size());
    names_.push_back(name);
    tensors_.push_back(std::move(tensor));
    return tensors_.size() - 1;
  }

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("ParameterSet: no parameter named '" + name + "'");
    return it->second;
  }

  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }

  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor<T>& operator[](const std::string& name) { return tensors_[index_of(name)]; }
  const Tensor<T>& operator[](const std::string& name) const { return tensors_[index_of(name)]; }

  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  void bump_version() { ++version_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  /// Same names and shapes, all zeros, version 0.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (std::size_t i = 0; i < tensors_.size(); ++i) out.add(names_[i], Tensor<T>(tensors_[i].shape()));
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) t.set_zero();
  }

  bool same_layout(const ParameterSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (names_[i] != other.names_[i] || tensors_[i].shape() != other.tensors_[i].shape()) return false;
    }
    return true;
  }

  /// Copies values (and version) from a set with the same layout.
  void assign_values(const ParameterSet& other) {
    if (!same_layout(other)) throw ShapeError("ParameterSet: layout mismatch in assign_values");
    for (std::size_t i = 0; i < size(); ++i) tensors_[i].storage() = other.tensors_[i].storage();
    version_ = other.version_;
  }

  /// this += scale * other
  void add_scaled(const ParameterSet& other, T scale) {
    if (!same_layout(other)) throw ShapeError("ParameterSet: layout mismatch in add_scaled");
    for (std::size_t i = 0; i < size(); ++i) {
      auto dst = tensors_[i].values();
      auto src = other.tensors_[i].values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    }
  }

  /// Largest absolute entry (the max-norm); 0 for an empty set.
  T max_abs() const {
    T m = T(0);
    for (const auto& t : tensors_)
      for (T v : t.values()) m = std::max(m, static_cast<T>(std::abs(v)));
    return m;
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      if (!t.all_finite()) return false;
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t version_ = 0;
};

/// Names, shapes, payload bytes and version all equal.
template <class T>
bool bit_equal(const ParameterSet<T>& a, const ParameterSet<T>& b) {
  if (!a.same_layout(b) || a.version() != b.version()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bit_equal(a[i], b[i])) return false;
  return true;
}

/// Payload equality ignoring the version counter.
template <class T>
bool values_bit_equal(const ParameterSet<T>& a, const ParameterSet<T>& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bit_equal(a[i], b[i])) return false;
  return true;
}

}  // namespace gridrl
