#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gridrl/approx/network.hpp"

namespace gridrl {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor so entries with near-zero true gradient compare absolutely.
  double floor = 1e-6;
  std::uint64_t projection_seed = 7;
  /// Applied to the analytic gradient before comparison (fault injection).
  std::function<void(ParameterSet<double>&)> corrupt;
};

namespace detail {

/// Scalar objective sum_t sum_h <w_{t,h}, out_{t,h}> + <w_s, final state>.
struct Projection {
  std::vector<std::vector<Tensor<double>>> heads;
  RecurrentState<double> state;
};

inline Projection make_projection(const Network<double>& net, std::size_t steps, std::uint64_t seed) {
  Rng rng(seed);
  Projection p;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<Tensor<double>> per_head;
    for (std::size_t h = 0; h < net.head_count(); ++h) {
      Tensor<double> w(net.head_shape(h));
      for (auto& v : w.values()) v = uniform_real(rng, -1.0, 1.0);
      per_head.push_back(std::move(w));
    }
    p.heads.push_back(std::move(per_head));
  }
  p.state = net.initial_state();
  for (auto& t : p.state.h)
    for (auto& v : t.values()) v = uniform_real(rng, -1.0, 1.0);
  for (auto& t : p.state.c)
    for (auto& v : t.values()) v = uniform_real(rng, -1.0, 1.0);
  return p;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double projected_objective(const Network<double>& net, const ParameterSet<double>& params,
                                  std::span<const Tensor<double>> inputs, const RecurrentState<double>& initial,
                                  const Projection& proj) {
  auto seq = forward_sequence(net, params, inputs, initial);
  double f = 0.0;
  for (std::size_t t = 0; t < seq.steps.size(); ++t)
    for (std::size_t h = 0; h < net.head_count(); ++h) f += dot(proj.heads[t][h], seq.steps[t].outputs[h]);
  const auto& fin = seq.final_state();
  for (std::size_t i = 0; i < fin.h.size(); ++i) f += dot(proj.state.h[i], fin.h[i]) + dot(proj.state.c[i], fin.c[i]);
  return f;
}

}  // namespace detail

/// Central-difference check of Network::backward on a random linear
/// projection of all head outputs (and, for recurrent nets, the final state)
/// over the given input sequence.
inline GradCheckReport finite_diff_check(const Network<double>& net, const ParameterSet<double>& params,
                                         std::span<const Tensor<double>> inputs,
                                         const RecurrentState<double>& initial_state = {},
                                         const GradCheckOptions& options = {}) {
  if (!(options.step > 0.0)) throw ParameterError("finite_diff_check: step must be positive");
  if (inputs.empty()) throw ParameterError("finite_diff_check: at least one input is required");
  const auto proj = detail::make_projection(net, inputs.size(), options.projection_seed);

  auto seq = forward_sequence(net, params, inputs, initial_state);
  ParameterSet<double> analytic = net.zero_gradients();
  backward_sequence(net, params, seq, proj.heads, analytic, net.recurrent() ? &proj.state : nullptr);
  if (options.corrupt) options.corrupt(analytic);

  GradCheckReport report;
  ParameterSet<double> probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t k = 0; k < probe[p].size(); ++k) {
      const double saved = probe[p][k];
      probe[p][k] = saved + options.step;
      const double up = detail::projected_objective(net, probe, inputs, initial_state, proj);
      probe[p][k] = saved - options.step;
      const double down = detail::projected_objective(net, probe, inputs, initial_state, proj);
      probe[p][k] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[p][k];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.floor});
      ++report.checked;
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = err;
        report.worst_parameter = probe.name(p);
        report.worst_index = k;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

inline GradCheckReport finite_diff_check(const Network<double>& net, const ParameterSet<double>& params,
                                         const Tensor<double>& input, double step, double tolerance) {
  GradCheckOptions options;
  options.step = step;
  options.tolerance = tolerance;
  return finite_diff_check(net, params, std::span<const Tensor<double>>(&input, 1), {}, options);
}

}  // namespace gridrl
