#include <gtest/gtest.h>

#include <deque>

#include "gridrl/envs/chain_walk.hpp"
#include "gridrl/envs/grid_world.hpp"

using namespace gridrl;

namespace {

// Independent shortest-path oracle over the open cells.
int bfs_distance(const GridWorld& g, Cell from, Cell to) {
  std::map<Cell, int> dist{{from, 0}};
  std::deque<Cell> queue{from};
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == to) return dist[c];
    const Cell next[4] = {{c.x, c.y - 1}, {c.x + 1, c.y}, {c.x, c.y + 1}, {c.x - 1, c.y}};
    for (const Cell& n : next) {
      if (g.blocked(n) || dist.count(n)) continue;
      dist[n] = dist[c] + 1;
      queue.push_back(n);
    }
  }
  return -1;
}

}  // namespace

TEST(ChainWalk, LengthTwoSingleStepRight) {
  ChainWalk chain{2, 3.0, 0.0};
  const auto mdp = chain_as_tabular(chain, 0.9);
  EXPECT_EQ(mdp.n_states(), 3u);
  EXPECT_EQ(mdp.initial_state(), 1u);
  EXPECT_EQ(mdp.prob(1, ChainWalk::kRight, 2), 1.0);
  EXPECT_EQ(mdp.reward(1, ChainWalk::kRight), 3.0);
  EXPECT_TRUE(mdp.is_terminal(2));

  ChainWalkEnv env(chain);
  EXPECT_EQ(env.reset(), 1u);
  const auto step = env.step(ChainWalk::kRight);
  EXPECT_EQ(step.reward, 3.0);
  EXPECT_TRUE(step.terminal);
  EXPECT_THROW(env.step(ChainWalk::kRight), UsageError);
}

TEST(ChainWalk, SlipRowsHoldBothProbabilities) {
  const auto mdp = chain_as_tabular(ChainWalk{5, 1.0, 0.1}, 0.9);
  for (std::size_t s = 1; s < 5; ++s) {
    EXPECT_DOUBLE_EQ(mdp.prob(s, ChainWalk::kRight, s + 1), 0.9);
    EXPECT_DOUBLE_EQ(mdp.prob(s, ChainWalk::kRight, s - 1), 0.1);
    EXPECT_DOUBLE_EQ(mdp.prob(s, ChainWalk::kLeft, s - 1), 0.9);
    EXPECT_DOUBLE_EQ(mdp.prob(s, ChainWalk::kLeft, s + 1), 0.1);
  }
}

TEST(ChainWalk, OptimalValueMatchesTrajectoryEnumeration) {
  ChainWalk chain{5, 1.0, 0.0};
  const double gamma = 0.9;
  const auto v = value_iteration(chain_as_tabular(chain, gamma), 1e-13);
  // Enumerate every deterministic action sequence of length <= 8 from the
  // start, keep the best discounted return.
  double best = 0.0;
  for (int len = 1; len <= 8; ++len) {
    for (int bits = 0; bits < (1 << len); ++bits) {
      std::size_t s = chain.start_state();
      double g = 0.0, scale = 1.0;
      for (int t = 0; t < len && !chain.is_terminal(s); ++t) {
        s = ((bits >> t) & 1) ? s + 1 : s - 1;
        if (s == chain.length) g += scale * chain.reward_right;
        scale *= gamma;
      }
      best = std::max(best, g);
    }
  }
  EXPECT_NEAR(v[chain.start_state()], best, 1e-11);
  EXPECT_NEAR(best, 0.81, 1e-12);
}

TEST(ChainWalk, RejectsInvalidParameters) {
  EXPECT_THROW(ChainWalkEnv(ChainWalk{1, 1.0, 0.0}), ValidationError);
  EXPECT_THROW(ChainWalkEnv(ChainWalk{5, 1.0, 0.5}), ValidationError);
}

TEST(ChainWalk, SameSeedSameEpisode) {
  ChainWalk chain{9, 1.0, 0.3};
  auto run = [&](std::uint64_t seed) {
    ChainWalkEnv env(chain, seed);
    std::vector<std::size_t> states{env.reset()};
    for (int i = 0; i < 200 && env.active(); ++i) states.push_back(env.step(ChainWalk::kRight).observation);
    return states;
  };
  EXPECT_EQ(run(42), run(42));
  EXPECT_NE(run(42), run(43));
}

TEST(ChainWalk, SampledFrequenciesMatchModel) {
  ChainWalk chain{5, 1.0, 0.2};
  ChainWalkEnv env(chain, 8);
  int slips = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    env.reset();
    if (env.step(ChainWalk::kRight).observation == chain.start_state() - 1) ++slips;
  }
  const double se = std::sqrt(0.2 * 0.8 / n);
  EXPECT_NEAR(static_cast<double>(slips) / n, 0.2, 4 * se);
}

TEST(GridWorld, OneByTwoGoalRight) {
  const auto grid = parse_grid_world("S1\n");
  auto env = grid_as_environment(grid);
  env->reset();
  const auto step = env->step(GridWorld::kRight);
  EXPECT_EQ(step.reward, 1.0);
  EXPECT_TRUE(step.terminal);
  EXPECT_THROW(env->step(GridWorld::kRight), UsageError);
}

TEST(GridWorld, BumpingWallKeepsObservation) {
  const auto grid = parse_grid_world(
      "S#.\n"
      "..9\n");
  auto env = grid_as_environment(grid);
  const auto start = env->reset();
  const auto bump = env->step(GridWorld::kRight);
  EXPECT_EQ(bump.observation, start);
  EXPECT_EQ(bump.reward, 0.0);
  EXPECT_FALSE(bump.terminal);
  const auto off_grid = env->step(GridWorld::kUp);
  EXPECT_EQ(off_grid.observation, start);
}

TEST(GridWorld, OptimalPathLengthEqualsBfsAndManhattan) {
  const auto grid = parse_grid_world(
      "S....\n"
      ".....\n"
      ".....\n"
      ".....\n"
      "....1\n");
  const Cell goal{4, 4};
  const int bfs = bfs_distance(grid, grid.start, goal);
  EXPECT_EQ(bfs, 8);
  const auto mdp = grid_as_tabular(grid, 0.9);
  const auto pi = greedy_policy(q_from_v(mdp, value_iteration(mdp, 1e-12)));
  auto env = grid_as_environment(grid);
  std::size_t s = env->reset();
  int steps = 0;
  while (env->active() && steps < 100) {
    s = env->step(pi[s]).observation;
    ++steps;
  }
  EXPECT_EQ(steps, bfs);
  EXPECT_EQ(grid.cell(s), goal);
}

TEST(GridWorld, MazeValueMatchesBfsDistance) {
  const auto grid = parse_grid_world(
      "S.#..\n"
      ".##.#\n"
      "...#.\n"
      "#....\n"
      "..#.3\n");
  const int d = bfs_distance(grid, grid.start, {4, 4});
  ASSERT_GT(d, 0);
  const auto v = value_iteration(grid_as_tabular(grid, 0.9), 1e-13);
  EXPECT_NEAR(v[grid.index(grid.start)], 3.0 * std::pow(0.9, d - 1), 1e-10);
}

TEST(GridWorld, ParseRejectsBadMaps) {
  EXPECT_THROW(parse_grid_world("S..\n"), ValidationError);
  EXPECT_THROW(parse_grid_world("S.x1\n"), ValidationError);
  EXPECT_THROW(parse_grid_world("S.1\n..\n"), ValidationError);
  EXPECT_THROW(parse_grid_world("..1\n"), ValidationError);
}

TEST(GridWorld, TabularModelPassesValidation) {
  const auto grid = parse_grid_world(
      "S.#\n"
      ".#.\n"
      "..2\n");
  const auto mdp = grid_as_tabular(grid, 0.95);
  for (std::size_t s = 0; s < mdp.n_states(); ++s)
    for (std::size_t a = 0; a < 4; ++a) {
      double sum = 0.0;
      for (double p : mdp.next_state_probs(s, a)) sum += p;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}
