#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gridrl/core/errors.hpp"

namespace gridrl {

/// Image with interleaved channels, row-major [height][width][channels].
struct Frame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  Frame() = default;
  Frame(std::size_t h, std::size_t w, std::size_t c = 1, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {
    if (c < 1) throw ShapeError("Frame: at least one channel is required");
  }

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const { return pixels[(y * width + x) * channels + c]; }

  bool same_shape(const Frame& o) const { return height == o.height && width == o.width && channels == o.channels; }

  void validate() const {
    if (channels < 1) throw ShapeError("Frame: at least one channel is required");
    if (pixels.size() != height * width * channels) throw ShapeError("Frame: pixel count does not match its shape");
    for (double v : pixels)
      if (!std::isfinite(v)) throw ValidationError("Frame: non-finite pixel");
  }

  bool operator==(const Frame&) const = default;
};

/// Undecoded 8-bit screen buffer, same layout as Frame.
struct RawFrame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<int> pixels;
};

/// Divides by 255 so pixels land in [0, 1].
inline Frame normalize(const RawFrame& raw) {
  if (raw.pixels.size() != raw.height * raw.width * raw.channels) {
    throw ShapeError("normalize: pixel count does not match the frame shape");
  }
  Frame out(raw.height, raw.width, raw.channels);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    const int v = raw.pixels[i];
    if (v < 0 || v > 255) throw ValidationError("normalize: raw pixel " + std::to_string(v) + " outside 0..255");
    out.pixels[i] = v / 255.0;
  }
  return out;
}

inline double sign_reward(double r) {
  if (std::isnan(r)) throw ValidationError("sign_reward: NaN reward");
  return r > 0.0 ? 1.0 : r < 0.0 ? -1.0 : 0.0;
}

/// Block mean over factor x factor tiles, per channel.
inline Frame downsample(const Frame& in, std::size_t factor = 2) {
  if (factor < 1) throw ParameterError("downsample: factor must be at least 1");
  if (in.height % factor != 0 || in.width % factor != 0) {
    throw ShapeError("downsample: " + std::to_string(in.height) + "x" + std::to_string(in.width) +
                     " is not divisible by " + std::to_string(factor));
  }
  Frame out(in.height / factor, in.width / factor, in.channels);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      for (std::size_t c = 0; c < in.channels; ++c) {
        double sum = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy)
          for (std::size_t dx = 0; dx < factor; ++dx) sum += in.at(y * factor + dy, x * factor + dx, c);
        out.at(y, x, c) = sum * inv;
      }
  return out;
}

/// Unweighted mean of the channels.
inline Frame grayscale(const Frame& in) {
  if (in.channels == 1) return in;
  Frame out(in.height, in.width, 1);
  const double inv = 1.0 / static_cast<double>(in.channels);
  for (std::size_t p = 0; p < in.height * in.width; ++p) {
    double sum = 0.0;
    for (std::size_t c = 0; c < in.channels; ++c) sum += in.pixels[p * in.channels + c];
    out.pixels[p] = sum * inv;
  }
  return out;
}

/// current - previous; values stay in [-1, 1] for inputs in [0, 1].
inline Frame delta_frame(const Frame& current, const Frame& previous) {
  if (!current.same_shape(previous)) throw ShapeError("delta_frame: frames differ in shape");
  Frame out(current.height, current.width, current.channels);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = current.pixels[i] - previous.pixels[i];
  return out;
}

/// Binary PGM (P5), maxval 255. Pixels are clamped to [0, 1] and rounded.
inline void write_pgm(std::ostream& out, const Frame& frame) {
  if (frame.channels != 1) throw ShapeError("write_pgm: grayscale frame required");
  out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  for (double v : frame.pixels) {
    const double c = std::min(1.0, std::max(0.0, v));
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  if (!out) throw IoError("write_pgm: write failed");
}

inline RawFrame read_pgm_raw(std::istream& in) {
  auto token = [&in]() {
    std::string t;
    while (t.empty()) {
      const int ch = in.peek();
      if (ch == std::char_traits<char>::eof()) throw IoError("read_pgm: truncated header");
      if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        in >> t;
      }
    }
    return t;
  };
  if (token() != "P5") throw IoError("read_pgm: not a binary PGM (P5)");
  RawFrame raw;
  try {
    raw.width = std::stoul(token());
    raw.height = std::stoul(token());
    if (std::stoul(token()) != 255) throw IoError("read_pgm: only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw IoError("read_pgm: malformed header");
  }
  in.get();  // single whitespace before the raster
  raw.pixels.resize(raw.width * raw.height);
  for (auto& p : raw.pixels) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) throw IoError("read_pgm: truncated raster");
    p = ch;
  }
  return raw;
}

inline Frame read_pgm(std::istream& in) { return normalize(read_pgm_raw(in)); }

}  // namespace gridrl
