#pragma once

#include <ostream>

#include "gridrl/approx/gradcheck.hpp"
#include "gridrl/dqn/dqn.hpp"
#include "gridrl/tabular/policy_iteration.hpp"

namespace gridrl::harness {

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline CheckLine check_dynamic_programming() {
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
    const auto pi = policy_iteration(mdp);
    const auto vi = q_from_v(mdp, value_iteration(mdp, 1e-12));
    for (std::size_t s = 0; s < 6; ++s)
      for (std::size_t a = 0; a < 3; ++a) worst = std::max(worst, std::abs(pi.q(s, a) - vi(s, a)));
  }
  return {"policy iteration agrees with value iteration", worst <= 1e-6, "max |dQ| " + std::to_string(worst)};
}

inline CheckLine check_gradients() {
  const std::vector<std::pair<const char*, NetworkSpec>> nets{
      {"fully_connected", {{4}, {LayerSpec::fully_connected(3)}, {{"out", {LayerSpec::fully_connected(2)}}}}},
      {"conv2d", {{1, 5, 5}, {LayerSpec::conv2d(2, 3, 3)}, {{"out", {LayerSpec::fully_connected(2)}}}}},
      {"max_pool",
       {{1, 4, 4}, {LayerSpec::conv2d(2, 1, 1), LayerSpec::max_pool(2)}, {{"out", {LayerSpec::fully_connected(2)}}}}},
      {"lstm", {{3}, {LayerSpec::lstm(3)}, {{"out", {LayerSpec::fully_connected(2)}}}}},
      {"softmax", {{3}, {LayerSpec::fully_connected(4)}, {{"out", {LayerSpec::softmax()}}}}},
  };
  double worst = 0.0;
  std::string worst_kind;
  bool ok = true;
  for (const auto& [kind, spec] : nets) {
    const Network<double> net(spec);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      const auto params = net.init_parameters(rng);
      std::vector<Tensor<double>> inputs;
      for (int t = 0; t < (net.recurrent() ? 3 : 1); ++t) {
        Tensor<double> x(spec.input);
        for (double& v : x.values()) v = uniform_real(rng, -1.0, 1.0);
        inputs.push_back(std::move(x));
      }
      GradCheckOptions options;
      options.projection_seed = seed + 1;
      const auto report = finite_diff_check(net, params, inputs, {}, options);
      ok = ok && report.passed;
      if (report.max_relative_error >= worst) {
        worst = report.max_relative_error;
        worst_kind = kind;
      }
    }
  }
  return {"finite differences match backpropagation", ok,
          "worst relative error " + std::to_string(worst) + " (" + worst_kind + ")"};
}

inline CheckLine check_epsilon_schedule() {
  DqnConfig c;
  const bool ok = c.epsilon_at(0) == 1.0 && c.epsilon_at(c.warmup_observations) == 1.0 &&
                  c.epsilon_at(c.warmup_observations + c.anneal_steps) == 0.1 &&
                  c.epsilon_at(c.warmup_observations + 10 * c.anneal_steps) == 0.1;
  return {"epsilon schedule endpoints are exact", ok, "1.0 -> 0.1"};
}

inline CheckLine check_replay_uniformity() {
  ReplayMemory<int> memory(100);
  for (int i = 0; i < 100; ++i) memory.push({i, 0, 0.0, i, false});
  Rng rng(5);
  std::vector<double> counts(100, 0.0);
  const std::size_t draws = 100000;
  for (std::size_t k = 0; k < draws / 50; ++k)
    for (std::size_t slot : memory.sample_slots(50, rng)) counts[slot] += 1.0;
  const double expected = static_cast<double>(draws) / 100.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  return {"replay sampling is uniform", chi2 < 134.642, "chi2 " + std::to_string(chi2) + " (df 99, p = 0.01)"};
}

}  // namespace detail

/// Fast oracle and gradient verification; prints one line per check.
inline bool run_checks(std::ostream& out) {
  const std::vector<CheckLine> lines{detail::check_dynamic_programming(), detail::check_gradients(),
                                     detail::check_epsilon_schedule(), detail::check_replay_uniformity()};
  bool ok = true;
  for (const auto& l : lines) {
    out << (l.passed ? "PASS " : "FAIL ") << l.name << ": " << l.detail << '\n';
    ok = ok && l.passed;
  }
  return ok;
}

}  // namespace gridrl::harness
