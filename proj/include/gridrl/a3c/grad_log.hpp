#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "gridrl/approx/checkpoint.hpp"
#include "gridrl/approx/optim.hpp"

namespace gridrl {

// Layout, little-endian:
//   "GRLGLOG1" | entries until EOF, each:
//   u32 worker | u64 learning-rate bits (f64) | u32 count | count x tensor record (checkpoint encoding)
inline constexpr char kGradLogMagic[8] = {'G', 'R', 'L', 'G', 'L', 'O', 'G', '1'};

template <class T>
struct GradientLogEntry {
  std::uint32_t worker = 0;
  double learning_rate = 0.0;
  ParameterSet<T> gradients;
};

/// Appends every gradient applied to a shared store, in application order.
class GradientLogWriter {
 public:
  explicit GradientLogWriter(std::ostream& out) : out_(&out) {
    out_->write(kGradLogMagic, sizeof kGradLogMagic);
    if (!*out_) throw IoError("gradient log: write failed");
  }

  template <class T>
  void append(std::uint32_t worker, double learning_rate, const ParameterSet<T>& grads) {
    wire::put_le<std::uint32_t>(*out_, worker);
    wire::put_le<std::uint64_t>(*out_, std::bit_cast<std::uint64_t>(learning_rate));
    wire::put_le<std::uint32_t>(*out_, static_cast<std::uint32_t>(grads.size()));
    for (std::size_t i = 0; i < grads.size(); ++i) wire::write_tensor(*out_, grads.name(i), grads[i]);
    if (!*out_) throw IoError("gradient log: write failed");
    ++entries_;
  }

  std::uint64_t entries() const { return entries_; }

 private:
  std::ostream* out_;
  std::uint64_t entries_ = 0;
};

template <class T>
std::vector<GradientLogEntry<T>> read_gradient_log(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kGradLogMagic, sizeof magic) != 0) throw IoError("gradient log: bad magic");
  std::vector<GradientLogEntry<T>> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    GradientLogEntry<T> e;
    e.worker = wire::get_le<std::uint32_t>(in, "worker");
    e.learning_rate = std::bit_cast<double>(wire::get_le<std::uint64_t>(in, "learning rate"));
    const auto count = wire::get_le<std::uint32_t>(in, "tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
      auto [name, tensor] = wire::read_tensor<T>(in);
      e.gradients.add(name, std::move(tensor));
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Re-applies logged gradients with RMSProp from fresh statistics. `config`
/// supplies decay and epsilon; each entry carries its own learning rate.
template <class T>
ParameterSet<T> replay_gradient_log(ParameterSet<T> params, const std::vector<GradientLogEntry<T>>& entries,
                                    const RmsPropConfig& config) {
  ParameterSet<T> stats = params.zeros_like();
  for (const auto& e : entries) {
    RmsPropConfig rms = config;
    rms.learning_rate = e.learning_rate;
    rmsprop_step(params, e.gradients, stats, rms);
  }
  return params;
}

}  // namespace gridrl
