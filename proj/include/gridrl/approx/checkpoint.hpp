#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "gridrl/approx/parameter_set.hpp"

namespace gridrl {

// Layout, all integers little-endian:
//   "GRLCKPT1" | u32 count | count x (u16 name_len, name, u8 rank, rank x u64 dim, f32 payload) | u64 version
// Optimizer statistics follow the parameters in the same table with names
// prefixed by kStatsPrefix.

inline constexpr char kCheckpointMagic[8] = {'G', 'R', 'L', 'C', 'K', 'P', 'T', '1'};
inline constexpr const char* kStatsPrefix = "rmsprop/";

namespace wire {

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

template <class U>
void put_le(std::ostream& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

inline void need(std::istream& in, const char* what) {
  if (!in) throw IoError(std::string("checkpoint: truncated while reading ") + what);
}

template <class U>
U get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  need(in, what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<U>(v);
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in, "payload")); }

/// One named tensor record in checkpoint encoding.
template <class T>
void write_tensor(std::ostream& out, const std::string& name, const Tensor<T>& t) {
  if (name.size() > 0xFFFF) throw IoError("checkpoint: tensor name too long");
  if (t.rank() > 0xFF) throw IoError("checkpoint: tensor rank too large");
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u8(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
  for (T v : t.values()) put_f32(out, static_cast<float>(v));
}

template <class T>
std::pair<std::string, Tensor<T>> read_tensor(std::istream& in) {
  const auto len = get_le<std::uint16_t>(in, "name length");
  std::string name(len, '\0');
  in.read(name.data(), len);
  need(in, "name");
  const auto rank = get_le<std::uint8_t>(in, "rank");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    const auto dim = get_le<std::uint64_t>(in, "dims");
    if (dim != 0 && count > (std::uint64_t{1} << 40) / dim) throw IoError("checkpoint: tensor '" + name + "' is implausibly large");
    d = static_cast<std::size_t>(dim);
    count *= dim;
  }
  std::vector<T> data(static_cast<std::size_t>(count));
  for (auto& v : data) v = static_cast<T>(get_f32(in));
  return {std::move(name), Tensor<T>(std::move(shape), std::move(data))};
}

}  // namespace wire

template <class T>
struct Checkpoint {
  ParameterSet<T> params;
  ParameterSet<T> stats;
};

template <class T>
void write_checkpoint(std::ostream& out, const ParameterSet<T>& params, const ParameterSet<T>* stats = nullptr) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::size_t count = params.size() + (stats ? stats->size() : 0);
  wire::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(count));
  for (std::size_t i = 0; i < params.size(); ++i) wire::write_tensor(out, params.name(i), params[i]);
  if (stats)
    for (std::size_t i = 0; i < stats->size(); ++i) wire::write_tensor(out, kStatsPrefix + stats->name(i), (*stats)[i]);
  wire::put_le<std::uint64_t>(out, params.version());
  if (!out) throw IoError("checkpoint: write failed");
}

template <class T>
Checkpoint<T> read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw IoError("checkpoint: bad magic bytes");
  const auto count = wire::get_le<std::uint32_t>(in, "tensor count");
  Checkpoint<T> ck;
  const std::string prefix = kStatsPrefix;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = wire::read_tensor<T>(in);
    if (name.rfind(prefix, 0) == 0) {
      ck.stats.add(name.substr(prefix.size()), std::move(tensor));
    } else {
      ck.params.add(name, std::move(tensor));
    }
  }
  ck.params.set_version(wire::get_le<std::uint64_t>(in, "version"));
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint: trailing bytes after version");
  if (!ck.stats.empty() && !ck.stats.same_layout(ck.params)) throw IoError("checkpoint: optimizer stats do not match parameters");
  return ck;
}

/// Writes to a temporary sibling then renames, so readers never see a partial file.
template <class T>
void save_checkpoint(const ParameterSet<T>& params, const ParameterSet<T>* stats, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + tmp.string() + "' for writing");
    write_checkpoint(out, params, stats);
  }
  std::filesystem::rename(tmp, path);
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "'");
  return read_checkpoint<T>(in);
}

}  // namespace gridrl
