// Q-learning on a deterministic corridor, compared against value iteration.

#include <cmath>
#include <cstdio>

#include "gridrl/envs/chain_walk.hpp"
#include "gridrl/tabular/control.hpp"
#include "gridrl/tabular/policy_iteration.hpp"

int main() {
  using namespace gridrl;
  const ChainWalk chain{5, 1.0, 0.0};
  const TabularMdp mdp = chain_as_tabular(chain, 0.9);
  const auto q_star = q_from_v(mdp, value_iteration(mdp, 1e-12));

  ChainWalkEnv env(chain, 1);
  QTable q(chain.state_count(), 2, 0.1);
  Rng rng(2);
  for (int episode = 0; episode < 5000; ++episode) q_learning_episode(env, q, 0.3, 0.9, rng);

  std::printf("state   Q(left)  Q*(left)  Q(right) Q*(right)\n");
  for (std::size_t s = 0; s < chain.state_count(); ++s)
    std::printf("%5zu %9.4f %9.4f %9.4f %9.4f\n", s, q(s, 0), q_star(s, 0), q(s, 1), q_star(s, 1));
}
