// Scores of two scripted policies on the small arena, then one rendered frame.

#include <iostream>

#include "gridrl/minideathmatch/world.hpp"

namespace dm = gridrl::deathmatch;

double play(dm::MiniDeathmatch& env, const dm::FramePolicy& policy, std::uint64_t seed) {
  auto frame = env.reset(seed);
  double score = 0.0;
  while (env.active()) {
    const auto st = env.step(policy(frame));
    score += st.reward;
    frame = st.observation;
  }
  return score;
}

int main() {
  dm::MiniDeathmatch env(dm::small_config());
  const int episodes = 50;
  double random_total = 0.0, scripted_total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    random_total += play(env, dm::random_frame_policy(e), e);
    scripted_total += play(env, dm::turn_and_shoot_policy(), e);
  }
  std::cout << "random policy     mean score " << random_total / episodes << '\n'
            << "turn and shoot    mean score " << scripted_total / episodes << "\n\n";

  env.reset(0);
  std::cout << env.world().ascii(env.state());
}
