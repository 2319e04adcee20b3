#pragma once

#include <algorithm>
#include <cmath>

#include "gridrl/approx/parameter_set.hpp"

namespace gridrl {

/// Elementwise clamp to [-threshold, threshold]. Returns the fraction of
/// entries that were changed.
template <class T>
double clip_gradients(ParameterSet<T>& grads, T threshold = T(10)) {
  if (!(threshold > T(0))) throw ParameterError("clip_gradients: threshold must be positive");
  std::size_t total = 0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (auto& g : grads[i].values()) {
      ++total;
      if (g > threshold) {
        g = threshold;
        ++clipped;
      } else if (g < -threshold) {
        g = -threshold;
        ++clipped;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(total);
}

struct RmsPropConfig {
  double learning_rate = 2e-5;
  double decay = 0.99;
  double epsilon = 1e-8;
};

/// RMSProp on one tensor: m <- decay*m + (1-decay)*g^2; theta <- theta - lr*g/sqrt(m + eps).
template <class T>
void rmsprop_tensor_step(Tensor<T>& theta, const Tensor<T>& grad, Tensor<T>& mean_square, const RmsPropConfig& config) {
  const T lr = static_cast<T>(config.learning_rate);
  const T rho = static_cast<T>(config.decay);
  const T one_minus = T(1) - rho;
  const T eps = static_cast<T>(config.epsilon);
  T* th = theta.data();
  const T* g = grad.data();
  T* m = mean_square.data();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = rho * m[k] + one_minus * g[k] * g[k];
    th[k] -= lr * g[k] / std::sqrt(m[k] + eps);
  }
}

inline void check_rmsprop_config(const RmsPropConfig& config) {
  if (!(config.decay >= 0.0 && config.decay < 1.0)) throw ParameterError("rmsprop_step: decay must be in [0,1)");
}

/// Whole-set RMSProp step. Bumps the parameter version once.
template <class T>
void rmsprop_step(ParameterSet<T>& params, const ParameterSet<T>& grads, ParameterSet<T>& stats,
                  const RmsPropConfig& config) {
  check_rmsprop_config(config);
  if (!params.same_layout(grads) || !params.same_layout(stats)) {
    throw ShapeError("rmsprop_step: params, grads and stats must share one layout");
  }
  for (std::size_t i = 0; i < params.size(); ++i) rmsprop_tensor_step(params[i], grads[i], stats[i], config);
  params.bump_version();
}

/// initial * (1 - step/total), zero once step >= total.
inline double linear_lr(double initial, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps == 0 || step >= total_steps) return 0.0;
  return std::max(0.0, initial * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps)));
}

}  // namespace gridrl
