#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridrl/approx/parameter_set.hpp"
#include "gridrl/approx/tensor.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

enum class LayerKind { fully_connected, conv2d, max_pool, lstm, softmax, relu };
enum class PoolMode { max, mean };

inline const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::lstm: return "lstm";
    case LayerKind::softmax: return "softmax";
    case LayerKind::relu: return "relu";
  }
  return "unknown";
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;
  std::size_t filters = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pool = 2;
  PoolMode pool_mode = PoolMode::max;

  static LayerSpec fully_connected(std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::fully_connected;
    s.units = units;
    return s;
  }
  static LayerSpec conv2d(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride = 1) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.filters = filters;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    s.stride = stride;
    return s;
  }
  /// stride 0 means non-overlapping windows (stride = size).
  static LayerSpec max_pool(std::size_t size, std::size_t stride = 0, PoolMode mode = PoolMode::max) {
    LayerSpec s;
    s.kind = LayerKind::max_pool;
    s.pool = size;
    s.stride = stride == 0 ? size : stride;
    s.pool_mode = mode;
    return s;
  }
  static LayerSpec mean_pool(std::size_t size, std::size_t stride = 0) {
    return max_pool(size, stride, PoolMode::mean);
  }
  static LayerSpec lstm(std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::lstm;
    s.units = units;
    return s;
  }
  static LayerSpec softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
};

struct HeadSpec {
  std::string name;
  std::vector<LayerSpec> layers;
};

/// A trunk of layers shared by one or more named heads.
struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> trunk;
  std::vector<HeadSpec> heads;
};

/// Hidden and cell vectors of every LSTM layer, in network order.
template <class T>
struct RecurrentState {
  std::vector<Tensor<T>> h;
  std::vector<Tensor<T>> c;

  bool empty() const { return h.empty(); }
  void set_zero() {
    for (auto& t : h) t.set_zero();
    for (auto& t : c) t.set_zero();
  }
  bool operator==(const RecurrentState&) const = default;
};

template <class T>
struct LayerCache {
  Tensor<T> input;
  Tensor<T> output;
  std::vector<Tensor<T>> buffers;
  std::vector<std::size_t> indices;
};

template <class T>
struct ForwardCache {
  std::vector<LayerCache<T>> trunk;
  std::vector<std::vector<LayerCache<T>>> heads;
  const void* network = nullptr;
  const void* params = nullptr;
  std::uint64_t params_version = 0;
};

template <class T>
struct ForwardResult {
  std::vector<Tensor<T>> outputs;
  ForwardCache<T> cache;
  RecurrentState<T> state;
};

namespace detail {

template <class T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Row-major matrix and column-vector views over tensor storage.
template <class T>
Eigen::Map<RowMajor<T>> mat(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
template <class T>
Eigen::Map<const RowMajor<T>> mat(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
template <class T>
Eigen::Map<const RowMajor<T>> cmat(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return mat(t, rows, cols);
}
template <class T>
Eigen::Map<ColVec<T>> vec(Tensor<T>& t, std::size_t n) {
  return {t.data(), static_cast<Eigen::Index>(n)};
}
template <class T>
Eigen::Map<const ColVec<T>> cvec(const Tensor<T>& t, std::size_t n) {
  return {t.data(), static_cast<Eigen::Index>(n)};
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
class Layer {
 public:
  Layer(std::string name, Shape input_shape) : name_(std::move(name)), in_shape_(std::move(input_shape)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return in_shape_; }
  const Shape& output_shape() const { return out_shape_; }

  /// Appends zero-filled parameters and remembers their positions.
  virtual void declare_parameters(ParameterSet<T>&) {}
  /// Fills this layer's parameters (already laid out) with initial values.
  virtual void initialize(ParameterSet<T>&, Rng&) const {}
  virtual bool recurrent() const { return false; }
  virtual std::size_t state_size() const { return 0; }

  virtual Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in, LayerCache<T>& cache,
                            const RecurrentState<T>* state_in, RecurrentState<T>* state_out) const = 0;

  /// Accumulates parameter gradients into `grads` and returns the input gradient
  /// (empty when need_input_grad is false).
  virtual Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache, const Tensor<T>& grad_out,
                             ParameterSet<T>& grads, bool need_input_grad, const RecurrentState<T>* grad_state_out,
                             RecurrentState<T>* grad_state_in) const = 0;

  void set_state_slot(std::size_t slot) { state_slot_ = slot; }

 protected:
  std::string name_;
  Shape in_shape_;
  Shape out_shape_;
  std::size_t state_slot_ = 0;
};

template <class T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor<T> w(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.values()) v = static_cast<T>(uniform_real(rng, -limit, limit));
  return w;
}

template <class T>
class FullyConnected final : public Layer<T> {
 public:
  FullyConnected(std::string name, Shape in, std::size_t units) : Layer<T>(std::move(name), std::move(in)) {
    if (units == 0) throw ShapeError("layer '" + this->name_ + "': fully_connected needs units > 0");
    in_size_ = shape_size(this->in_shape_);
    units_ = units;
    this->out_shape_ = {units};
  }

  void declare_parameters(ParameterSet<T>& params) override {
    w_ = params.add(this->name_ + ".weight", Tensor<T>({units_, in_size_}));
    b_ = params.add(this->name_ + ".bias", Tensor<T>({units_}));
  }
  void initialize(ParameterSet<T>& params, Rng& rng) const override {
    params[w_] = glorot_uniform<T>({units_, in_size_}, in_size_, units_, rng);
  }

  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in, LayerCache<T>& cache,
                    const RecurrentState<T>*, RecurrentState<T>*) const override {
    Tensor<T> out({units_});
    vec(out, units_) = mat(params[w_], units_, in_size_) * cvec(in, in_size_) + cvec(params[b_], units_);
    cache.input = in;
    return out;
  }

  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache, const Tensor<T>& grad_out,
                     ParameterSet<T>& grads, bool need_input_grad, const RecurrentState<T>*,
                     RecurrentState<T>*) const override {
    const auto g = cvec(grad_out, units_);
    vec(grads[b_], units_) += g;
    mat(grads[w_], units_, in_size_).noalias() += g * cvec(cache.input, in_size_).transpose();
    Tensor<T> dx;
    if (need_input_grad) {
      dx = Tensor<T>(this->in_shape_);
      vec(dx, in_size_).noalias() = mat(params[w_], units_, in_size_).transpose() * g;
    }
    return dx;
  }

 private:
  std::size_t in_size_ = 0;
  std::size_t units_ = 0;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
};

template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, Shape in, const LayerSpec& spec) : Layer<T>(std::move(name), std::move(in)) {
    if (this->in_shape_.size() != 3) {
      throw ShapeError("layer '" + this->name_ + "': conv2d expects [channels][height][width] input, got " +
                       shape_string(this->in_shape_));
    }
    if (spec.filters == 0 || spec.kernel_h == 0 || spec.kernel_w == 0 || spec.stride == 0) {
      throw ShapeError("layer '" + this->name_ + "': conv2d sizes must be positive");
    }
    channels_ = this->in_shape_[0];
    height_ = this->in_shape_[1];
    width_ = this->in_shape_[2];
    filters_ = spec.filters;
    kh_ = spec.kernel_h;
    kw_ = spec.kernel_w;
    stride_ = spec.stride;
    if (kh_ > height_ || kw_ > width_) {
      throw ShapeError("layer '" + this->name_ + "': kernel larger than input " + shape_string(this->in_shape_));
    }
    out_h_ = (height_ - kh_) / stride_ + 1;
    out_w_ = (width_ - kw_) / stride_ + 1;
    this->out_shape_ = {filters_, out_h_, out_w_};
  }

  void declare_parameters(ParameterSet<T>& params) override {
    w_ = params.add(this->name_ + ".weight", Tensor<T>({filters_, channels_, kh_, kw_}));
    b_ = params.add(this->name_ + ".bias", Tensor<T>({filters_}));
  }
  void initialize(ParameterSet<T>& params, Rng& rng) const override {
    params[w_] = glorot_uniform<T>({filters_, channels_, kh_, kw_}, channels_ * kh_ * kw_, filters_ * kh_ * kw_, rng);
  }

  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in, LayerCache<T>& cache,
                    const RecurrentState<T>*, RecurrentState<T>*) const override {
    // im2col: column p holds the receptive field of output pixel p.
    const std::size_t patch = channels_ * kh_ * kw_, pixels = out_h_ * out_w_;
    Tensor<T> col({patch, pixels});
    const T* x = in.data();
    T* cp = col.data();
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t ky = 0; ky < kh_; ++ky)
        for (std::size_t kx = 0; kx < kw_; ++kx, cp += pixels)
          for (std::size_t oy = 0; oy < out_h_; ++oy) {
            const T* xr = x + (c * height_ + oy * stride_ + ky) * width_ + kx;
            for (std::size_t ox = 0; ox < out_w_; ++ox) cp[oy * out_w_ + ox] = xr[ox * stride_];
          }
    Tensor<T> out(this->out_shape_);
    auto y = mat(out, filters_, pixels);
    y.noalias() = mat(params[w_], filters_, patch) * cmat(col, patch, pixels);
    y.colwise() += cvec(params[b_], filters_);
    cache.buffers.assign(1, std::move(col));
    return out;

  }

  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache, const Tensor<T>& grad_out,
                     ParameterSet<T>& grads, bool need_input_grad, const RecurrentState<T>*,
                     RecurrentState<T>*) const override {
    const std::size_t patch = channels_ * kh_ * kw_, pixels = out_h_ * out_w_;
    const Tensor<T>& col = cache.buffers.at(0);
    const auto g = cmat(grad_out, filters_, pixels);
    vec(grads[b_], filters_) += g.rowwise().sum();
    mat(grads[w_], filters_, patch).noalias() += g * cmat(col, patch, pixels).transpose();
    Tensor<T> dx;
    if (!need_input_grad) return dx;
    Tensor<T> dcol({patch, pixels});
    mat(dcol, patch, pixels).noalias() = mat(params[w_], filters_, patch).transpose() * g;
    dx = Tensor<T>(this->in_shape_);
    T* dxp = dx.data();
    const T* cp = dcol.data();
    for (std::size_t c = 0; c < channels_; ++c)
      for (std::size_t ky = 0; ky < kh_; ++ky)
        for (std::size_t kx = 0; kx < kw_; ++kx, cp += pixels)
          for (std::size_t oy = 0; oy < out_h_; ++oy) {
            T* xr = dxp + (c * height_ + oy * stride_ + ky) * width_ + kx;
            for (std::size_t ox = 0; ox < out_w_; ++ox) xr[ox * stride_] += cp[oy * out_w_ + ox];
          }
    return dx;
  }

 private:
  std::size_t channels_ = 0, height_ = 0, width_ = 0;
  std::size_t filters_ = 0, kh_ = 0, kw_ = 0, stride_ = 1;
  std::size_t out_h_ = 0, out_w_ = 0;
  std::size_t w_ = 0, b_ = 0;
};

template <class T>
class Pool2d final : public Layer<T> {
 public:
  Pool2d(std::string name, Shape in, const LayerSpec& spec) : Layer<T>(std::move(name), std::move(in)) {
    if (this->in_shape_.size() != 3) {
      throw ShapeError("layer '" + this->name_ + "': pooling expects [channels][height][width] input, got " +
                       shape_string(this->in_shape_));
    }
    if (spec.pool == 0 || spec.stride == 0) throw ShapeError("layer '" + this->name_ + "': pool sizes must be positive");
    channels_ = this->in_shape_[0];
    height_ = this->in_shape_[1];
    width_ = this->in_shape_[2];
    size_ = spec.pool;
    stride_ = spec.stride;
    mode_ = spec.pool_mode;
    if (size_ > height_ || size_ > width_) {
      throw ShapeError("layer '" + this->name_ + "': pool window larger than input " + shape_string(this->in_shape_));
    }
    out_h_ = (height_ - size_) / stride_ + 1;
    out_w_ = (width_ - size_) / stride_ + 1;
    this->out_shape_ = {channels_, out_h_, out_w_};
  }

  Tensor<T> forward(const ParameterSet<T>&, const Tensor<T>& in, LayerCache<T>& cache, const RecurrentState<T>*,
                    RecurrentState<T>*) const override {
    Tensor<T> out(this->out_shape_);
    const T* x = in.data();
    const T inv = T(1) / static_cast<T>(size_ * size_);
    if (mode_ == PoolMode::max) cache.indices.assign(out.size(), 0);
    for (std::size_t c = 0; c < channels_; ++c) {
      for (std::size_t oy = 0; oy < out_h_; ++oy) {
        for (std::size_t ox = 0; ox < out_w_; ++ox) {
          const std::size_t o = (c * out_h_ + oy) * out_w_ + ox;
          std::size_t best = (c * height_ + oy * stride_) * width_ + ox * stride_;
          T acc = T(0);
          for (std::size_t ky = 0; ky < size_; ++ky) {
            for (std::size_t kx = 0; kx < size_; ++kx) {
              const std::size_t i = (c * height_ + oy * stride_ + ky) * width_ + ox * stride_ + kx;
              acc += x[i];
              if (x[i] > x[best]) best = i;
            }
          }
          if (mode_ == PoolMode::max) {
            out[o] = x[best];
            cache.indices[o] = best;
          } else {
            out[o] = acc * inv;
          }
        }
      }
    }
    return out;
  }

  Tensor<T> backward(const ParameterSet<T>&, const LayerCache<T>& cache, const Tensor<T>& grad_out, ParameterSet<T>&,
                     bool need_input_grad, const RecurrentState<T>*, RecurrentState<T>*) const override {
    if (!need_input_grad) return {};
    Tensor<T> dx(this->in_shape_);
    if (mode_ == PoolMode::max) {
      for (std::size_t o = 0; o < grad_out.size(); ++o) dx[cache.indices[o]] += grad_out[o];
      return dx;
    }
    const T inv = T(1) / static_cast<T>(size_ * size_);
    for (std::size_t c = 0; c < channels_; ++c) {
      for (std::size_t oy = 0; oy < out_h_; ++oy) {
        for (std::size_t ox = 0; ox < out_w_; ++ox) {
          const T g = grad_out[(c * out_h_ + oy) * out_w_ + ox] * inv;
          for (std::size_t ky = 0; ky < size_; ++ky)
            for (std::size_t kx = 0; kx < size_; ++kx)
              dx[(c * height_ + oy * stride_ + ky) * width_ + ox * stride_ + kx] += g;
        }
      }
    }
    return dx;
  }

 private:
  std::size_t channels_ = 0, height_ = 0, width_ = 0;
  std::size_t size_ = 2, stride_ = 2;
  std::size_t out_h_ = 0, out_w_ = 0;
  PoolMode mode_ = PoolMode::max;
};

template <class T>
class Relu final : public Layer<T> {
 public:
  Relu(std::string name, Shape in) : Layer<T>(std::move(name), std::move(in)) { this->out_shape_ = this->in_shape_; }

  Tensor<T> forward(const ParameterSet<T>&, const Tensor<T>& in, LayerCache<T>& cache, const RecurrentState<T>*,
                    RecurrentState<T>*) const override {
    Tensor<T> out = in;
    for (auto& v : out.values()) v = v > T(0) ? v : T(0);
    cache.output = out;
    return out;
  }

  Tensor<T> backward(const ParameterSet<T>&, const LayerCache<T>& cache, const Tensor<T>& grad_out, ParameterSet<T>&,
                     bool need_input_grad, const RecurrentState<T>*, RecurrentState<T>*) const override {
    if (!need_input_grad) return {};
    Tensor<T> dx = grad_out.reshaped(this->in_shape_);
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(cache.output[i] > T(0))) dx[i] = T(0);
    return dx;
  }
};

template <class T>
class Softmax final : public Layer<T> {
 public:
  Softmax(std::string name, Shape in) : Layer<T>(std::move(name), std::move(in)) {
    this->out_shape_ = {shape_size(this->in_shape_)};
  }

  Tensor<T> forward(const ParameterSet<T>&, const Tensor<T>& in, LayerCache<T>& cache, const RecurrentState<T>*,
                    RecurrentState<T>*) const override {
    Tensor<T> out = in.reshaped(this->out_shape_);
    T m = out[0];
    for (T v : out.values()) m = std::max(m, v);
    T sum = T(0);
    for (auto& v : out.values()) {
      v = std::exp(v - m);
      sum += v;
    }
    for (auto& v : out.values()) v /= sum;
    cache.output = out;
    return out;
  }

  Tensor<T> backward(const ParameterSet<T>&, const LayerCache<T>& cache, const Tensor<T>& grad_out, ParameterSet<T>&,
                     bool need_input_grad, const RecurrentState<T>*, RecurrentState<T>*) const override {
    if (!need_input_grad) return {};
    const auto& y = cache.output;
    T dot = T(0);
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * grad_out[i];
    Tensor<T> dx(this->in_shape_);
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (grad_out[i] - dot);
    return dx;
  }
};

/// Standard LSTM cell. Gate blocks in the stacked pre-activation are ordered
/// input, forget, output, candidate.
template <class T>
class Lstm final : public Layer<T> {
 public:
  Lstm(std::string name, Shape in, std::size_t units) : Layer<T>(std::move(name), std::move(in)) {
    if (units == 0) throw ShapeError("layer '" + this->name_ + "': lstm needs units > 0");
    in_size_ = shape_size(this->in_shape_);
    units_ = units;
    this->out_shape_ = {units};
  }

  bool recurrent() const override { return true; }
  std::size_t state_size() const override { return units_; }

  void declare_parameters(ParameterSet<T>& params) override {
    const std::size_t g = 4 * units_;
    wx_ = params.add(this->name_ + ".wx", Tensor<T>({g, in_size_}));
    wh_ = params.add(this->name_ + ".wh", Tensor<T>({g, units_}));
    b_ = params.add(this->name_ + ".bias", Tensor<T>({g}));
  }
  void initialize(ParameterSet<T>& params, Rng& rng) const override {
    const std::size_t g = 4 * units_;
    params[wx_] = glorot_uniform<T>({g, in_size_}, in_size_, units_, rng);
    params[wh_] = glorot_uniform<T>({g, units_}, units_, units_, rng);
    for (std::size_t j = 0; j < units_; ++j) params[b_][units_ + j] = T(1);
  }

  Tensor<T> forward(const ParameterSet<T>& params, const Tensor<T>& in, LayerCache<T>& cache,
                    const RecurrentState<T>* state_in, RecurrentState<T>* state_out) const override {
    const std::size_t m = units_;
    const T* wx = params[wx_].data();
    const T* wh = params[wh_].data();
    const T* b = params[b_].data();
    const T* x = in.data();
    const Tensor<T>& h_prev = state_in->h[this->state_slot_];
    const Tensor<T>& c_prev = state_in->c[this->state_slot_];
    Tensor<T> gates({4 * m});
    for (std::size_t r = 0; r < 4 * m; ++r) {
      T acc = b[r];
      const T* rx = wx + r * in_size_;
      for (std::size_t i = 0; i < in_size_; ++i) acc += rx[i] * x[i];
      const T* rh = wh + r * m;
      for (std::size_t j = 0; j < m; ++j) acc += rh[j] * h_prev[j];
      gates[r] = acc;
    }
    Tensor<T> c_new({m});
    Tensor<T> tanh_c({m});
    Tensor<T> h_new({m});
    for (std::size_t j = 0; j < m; ++j) {
      const T ig = sigmoid(gates[j]);
      const T fg = sigmoid(gates[m + j]);
      const T og = sigmoid(gates[2 * m + j]);
      const T cg = std::tanh(gates[3 * m + j]);
      gates[j] = ig;
      gates[m + j] = fg;
      gates[2 * m + j] = og;
      gates[3 * m + j] = cg;
      c_new[j] = fg * c_prev[j] + ig * cg;
      tanh_c[j] = std::tanh(c_new[j]);
      h_new[j] = og * tanh_c[j];
    }
    cache.input = in;
    cache.buffers = {gates, h_prev, c_prev, tanh_c};
    state_out->h[this->state_slot_] = h_new;
    state_out->c[this->state_slot_] = c_new;
    return h_new;
  }

  Tensor<T> backward(const ParameterSet<T>& params, const LayerCache<T>& cache, const Tensor<T>& grad_out,
                     ParameterSet<T>& grads, bool need_input_grad, const RecurrentState<T>* grad_state_out,
                     RecurrentState<T>* grad_state_in) const override {
    const std::size_t m = units_;
    const T* wx = params[wx_].data();
    const T* wh = params[wh_].data();
    const Tensor<T>& gates = cache.buffers[0];
    const Tensor<T>& h_prev = cache.buffers[1];
    const Tensor<T>& c_prev = cache.buffers[2];
    const Tensor<T>& tanh_c = cache.buffers[3];
    const T* x = cache.input.data();

    Tensor<T> dz({4 * m});
    Tensor<T> dc_prev({m});
    for (std::size_t j = 0; j < m; ++j) {
      T dh = grad_out[j];
      T dc = T(0);
      if (grad_state_out) {
        dh += grad_state_out->h[this->state_slot_][j];
        dc += grad_state_out->c[this->state_slot_][j];
      }
      const T ig = gates[j], fg = gates[m + j], og = gates[2 * m + j], cg = gates[3 * m + j];
      dc += dh * og * (T(1) - tanh_c[j] * tanh_c[j]);
      const T d_og = dh * tanh_c[j];
      dz[j] = dc * cg * ig * (T(1) - ig);
      dz[m + j] = dc * c_prev[j] * fg * (T(1) - fg);
      dz[2 * m + j] = d_og * og * (T(1) - og);
      dz[3 * m + j] = dc * ig * (T(1) - cg * cg);
      dc_prev[j] = dc * fg;
    }

    T* dwx = grads[wx_].data();
    T* dwh = grads[wh_].data();
    T* db = grads[b_].data();
    Tensor<T> dx;
    if (need_input_grad) dx = Tensor<T>(this->in_shape_);
    Tensor<T> dh_prev({m});
    for (std::size_t r = 0; r < 4 * m; ++r) {
      const T g = dz[r];
      if (g == T(0)) continue;
      db[r] += g;
      T* rx = dwx + r * in_size_;
      const T* wrx = wx + r * in_size_;
      for (std::size_t i = 0; i < in_size_; ++i) rx[i] += g * x[i];
      if (need_input_grad)
        for (std::size_t i = 0; i < in_size_; ++i) dx[i] += wrx[i] * g;
      T* rh = dwh + r * m;
      const T* wrh = wh + r * m;
      for (std::size_t j = 0; j < m; ++j) {
        rh[j] += g * h_prev[j];
        dh_prev[j] += wrh[j] * g;
      }
    }
    if (grad_state_in) {
      grad_state_in->h[this->state_slot_] = std::move(dh_prev);
      grad_state_in->c[this->state_slot_] = std::move(dc_prev);
    }
    return dx;
  }

 private:
  std::size_t in_size_ = 0;
  std::size_t units_ = 0;
  std::size_t wx_ = 0, wh_ = 0, b_ = 0;
};

template <class T>
std::unique_ptr<Layer<T>> make_layer(const std::string& name, const Shape& in, const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::fully_connected: return std::make_unique<FullyConnected<T>>(name, in, spec.units);
    case LayerKind::conv2d: return std::make_unique<Conv2d<T>>(name, in, spec);
    case LayerKind::max_pool: return std::make_unique<Pool2d<T>>(name, in, spec);
    case LayerKind::lstm: return std::make_unique<Lstm<T>>(name, in, spec.units);
    case LayerKind::softmax: return std::make_unique<Softmax<T>>(name, in);
    case LayerKind::relu: return std::make_unique<Relu<T>>(name, in);
  }
  throw ShapeError("unknown layer kind");
}

}  // namespace detail

/// Fixed layer pipeline with named heads. Parameters live outside the network
/// in a ParameterSet so that online/target copies and worker snapshots share
/// one Network instance.
template <class T>
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.input.empty() || shape_size(spec_.input) == 0) throw ShapeError("network: input shape must be non-empty");
    if (spec_.heads.empty()) throw ShapeError("network: at least one head is required");
    Shape shape = spec_.input;
    for (std::size_t i = 0; i < spec_.trunk.size(); ++i) {
      const std::string name = "trunk." + std::to_string(i) + "." + layer_kind_name(spec_.trunk[i].kind);
      trunk_.push_back(detail::make_layer<T>(name, shape, spec_.trunk[i]));
      shape = trunk_.back()->output_shape();
    }
    trunk_shape_ = shape;
    for (const auto& head : spec_.heads) {
      if (head.name.empty()) throw ShapeError("network: head names must be non-empty");
      for (const auto& other : heads_)
        if (other.name == head.name) throw ShapeError("network: duplicate head '" + head.name + "'");
      Head h{head.name, {}, trunk_shape_};
      Shape hs = trunk_shape_;
      for (std::size_t i = 0; i < head.layers.size(); ++i) {
        const std::string name = head.name + "." + std::to_string(i) + "." + layer_kind_name(head.layers[i].kind);
        h.layers.push_back(detail::make_layer<T>(name, hs, head.layers[i]));
        hs = h.layers.back()->output_shape();
      }
      h.output_shape = hs;
      if (head.name == "value" && shape_size(hs) != 1) {
        throw ShapeError("network: the value head must have exactly one output, got " + shape_string(hs));
      }
      heads_.push_back(std::move(h));
    }
    for_each_layer([this](detail::Layer<T>& layer) {
      if (layer.recurrent()) {
        layer.set_state_slot(state_sizes_.size());
        state_sizes_.push_back(layer.state_size());
      }
    });
    ParameterSet<T> layout;
    for_each_layer([&layout](detail::Layer<T>& layer) { layer.declare_parameters(layout); });
    layout_ = std::move(layout);
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetworkSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return spec_.input; }
  const Shape& trunk_output_shape() const { return trunk_shape_; }
  std::size_t head_count() const { return heads_.size(); }
  const std::string& head_name(std::size_t i) const { return heads_[i].name; }
  const Shape& head_shape(std::size_t i) const { return heads_[i].output_shape; }
  bool has_head(const std::string& name) const {
    for (const auto& h : heads_)
      if (h.name == name) return true;
    return false;
  }
  std::size_t head_index(const std::string& name) const {
    for (std::size_t i = 0; i < heads_.size(); ++i)
      if (heads_[i].name == name) return i;
    throw ShapeError("network: no head named '" + name + "'");
  }
  bool recurrent() const { return !state_sizes_.empty(); }

  /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
  ParameterSet<T> init_parameters(Rng& rng) const {
    ParameterSet<T> params = layout_.zeros_like();
    for_each_layer_const([&](const detail::Layer<T>& layer) { layer.initialize(params, rng); });
    return params;
  }

  RecurrentState<T> initial_state() const {
    RecurrentState<T> s;
    for (std::size_t n : state_sizes_) {
      s.h.emplace_back(Shape{n});
      s.c.emplace_back(Shape{n});
    }
    return s;
  }

  void check_parameters(const ParameterSet<T>& params) const {
    if (params.size() != layout_.size()) {
      throw ShapeError("network: parameter set has " + std::to_string(params.size()) + " tensors, expected " +
                       std::to_string(layout_.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].shape() != layout_[i].shape()) {
        throw ShapeError("network: parameter '" + layout_.name(i) + "' has shape " + shape_string(params[i].shape()) +
                         ", expected " + shape_string(layout_[i].shape()));
      }
    }
  }

  ForwardResult<T> forward(const ParameterSet<T>& params, const Tensor<T>& input,
                           const RecurrentState<T>* state = nullptr) const {
    check_parameters(params);
    if (input.shape() != spec_.input) {
      throw ShapeError("network: input shape " + shape_string(input.shape()) + " does not match " +
                       shape_string(spec_.input) + " expected by layer '" +
                       (trunk_.empty() ? heads_.front().layers.empty() ? std::string("<head>")
                                                                        : heads_.front().layers.front()->name()
                                       : trunk_.front()->name()) +
                       "'");
    }
    RecurrentState<T> zero;
    if (recurrent() && (state == nullptr || state->empty())) {
      zero = initial_state();
      state = &zero;
    }
    ForwardResult<T> result;
    result.state = recurrent() ? *state : RecurrentState<T>{};
    auto& cache = result.cache;
    cache.network = this;
    cache.params = &params;
    cache.params_version = params.version();
    cache.trunk.resize(trunk_.size());
    Tensor<T> x = input;
    for (std::size_t i = 0; i < trunk_.size(); ++i) x = trunk_[i]->forward(params, x, cache.trunk[i], state, &result.state);
    cache.heads.resize(heads_.size());
    for (std::size_t h = 0; h < heads_.size(); ++h) {
      cache.heads[h].resize(heads_[h].layers.size());
      Tensor<T> y = x;
      for (std::size_t i = 0; i < heads_[h].layers.size(); ++i) {
        y = heads_[h].layers[i]->forward(params, y, cache.heads[h][i], state, &result.state);
      }
      result.outputs.push_back(std::move(y));
    }
    return result;
  }

  /// Accumulates dLoss/dParams into `grads`. `head_grads[h]` may be empty
  /// (treated as zero). For recurrent nets `grad_state_out` is the gradient
  /// flowing into this step's output state and `grad_state_in` receives the
  /// gradient with respect to the input state. Returns the input gradient
  /// when requested.
  Tensor<T> backward_into(const ParameterSet<T>& params, const ForwardCache<T>& cache,
                          std::span<const Tensor<T>> head_grads, ParameterSet<T>& grads,
                          const RecurrentState<T>* grad_state_out = nullptr,
                          RecurrentState<T>* grad_state_in = nullptr, bool want_input_grad = false) const {
    if (cache.network != this) throw UsageError("network: cache was produced by a different network");
    if (cache.params != &params || cache.params_version != params.version()) {
      throw UsageError("network: stale cache (parameters changed since forward)");
    }
    if (head_grads.size() != heads_.size()) throw ShapeError("network: one gradient per head is required");
    if (!grads.same_layout(layout_)) throw ShapeError("network: gradient set layout does not match the network");
    RecurrentState<T> scratch;
    if (recurrent() && grad_state_in == nullptr) grad_state_in = &scratch;
    if (recurrent()) *grad_state_in = initial_state();

    const bool state_flows = recurrent() && grad_state_out != nullptr;
    Tensor<T> trunk_grad(trunk_shape_);
    bool any = false;
    for (std::size_t h = 0; h < heads_.size(); ++h) {
      if (head_grads[h].empty() && !state_flows) continue;
      if (!head_grads[h].empty() && head_grads[h].size() != shape_size(heads_[h].output_shape)) {
        throw ShapeError("network: gradient for head '" + heads_[h].name + "' has the wrong size");
      }
      Tensor<T> g = head_grads[h].empty() ? Tensor<T>(heads_[h].output_shape)
                                          : head_grads[h].reshaped(heads_[h].output_shape);
      for (std::size_t i = heads_[h].layers.size(); i-- > 0;) {
        const auto& layer = heads_[h].layers[i];
        g = layer->backward(params, cache.heads[h][i], g.reshaped(layer->output_shape()), grads, true, grad_state_out,
                            grad_state_in);
      }
      for (std::size_t k = 0; k < trunk_grad.size(); ++k) trunk_grad[k] += g[k];
      any = true;
    }
    if (!any && !state_flows && !want_input_grad) return {};
    Tensor<T> g = std::move(trunk_grad);
    for (std::size_t i = trunk_.size(); i-- > 0;) {
      const bool need = i > 0 || want_input_grad;
      g = trunk_[i]->backward(params, cache.trunk[i], g.reshaped(trunk_[i]->output_shape()), grads, need,
                              grad_state_out, grad_state_in);
    }
    return trunk_.empty() ? g.reshaped(spec_.input) : g;
  }

  ParameterSet<T> backward(const ParameterSet<T>& params, const ForwardCache<T>& cache,
                           std::span<const Tensor<T>> head_grads) const {
    ParameterSet<T> grads = layout_.zeros_like();
    backward_into(params, cache, head_grads, grads);
    return grads;
  }

  ParameterSet<T> zero_gradients() const { return layout_.zeros_like(); }

 private:
  struct Head {
    std::string name;
    std::vector<std::unique_ptr<detail::Layer<T>>> layers;
    Shape output_shape;
  };

  template <class F>
  void for_each_layer(F&& f) {
    for (auto& l : trunk_) f(*l);
    for (auto& h : heads_)
      for (auto& l : h.layers) f(*l);
  }
  template <class F>
  void for_each_layer_const(F&& f) const {
    for (const auto& l : trunk_) f(*l);
    for (const auto& h : heads_)
      for (const auto& l : h.layers) f(*l);
  }

  NetworkSpec spec_;
  std::vector<std::unique_ptr<detail::Layer<T>>> trunk_;
  std::vector<Head> heads_;
  Shape trunk_shape_;
  std::vector<std::size_t> state_sizes_;
  ParameterSet<T> layout_;
};

/// Per-step forward results of a sequence, with the state each step consumed.
template <class T>
struct SequenceForward {
  std::vector<ForwardResult<T>> steps;
  RecurrentState<T> initial_state;
  const RecurrentState<T>& final_state() const { return steps.empty() ? initial_state : steps.back().state; }
};

template <class T>
SequenceForward<T> forward_sequence(const Network<T>& net, const ParameterSet<T>& params,
                                    std::span<const Tensor<T>> inputs, const RecurrentState<T>& initial) {
  SequenceForward<T> seq;
  seq.initial_state = initial.empty() ? net.initial_state() : initial;
  const RecurrentState<T>* state = &seq.initial_state;
  for (const auto& x : inputs) {
    seq.steps.push_back(net.forward(params, x, state));
    state = &seq.steps.back().state;
  }
  return seq;
}

/// Backpropagation through time. `head_grads[t]` holds one tensor per head for
/// step t. Accumulates into `grads` and returns the gradient with respect to
/// the initial state.
template <class T>
RecurrentState<T> backward_sequence(const Network<T>& net, const ParameterSet<T>& params, const SequenceForward<T>& seq,
                                    const std::vector<std::vector<Tensor<T>>>& head_grads, ParameterSet<T>& grads,
                                    const RecurrentState<T>* final_state_grad = nullptr) {
  if (head_grads.size() != seq.steps.size()) throw ShapeError("backward_sequence: one gradient list per step");
  RecurrentState<T> carry = final_state_grad ? *final_state_grad : net.initial_state();
  for (std::size_t t = seq.steps.size(); t-- > 0;) {
    RecurrentState<T> prev;
    net.backward_into(params, seq.steps[t].cache, head_grads[t], grads, net.recurrent() ? &carry : nullptr,
                      net.recurrent() ? &prev : nullptr);
    if (net.recurrent()) carry = std::move(prev);
  }
  return carry;
}

}  // namespace gridrl
