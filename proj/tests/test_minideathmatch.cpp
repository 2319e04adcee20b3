#include <gtest/gtest.h>

#include <fstream>
#include <queue>
#include <set>

#include "gridrl/minideathmatch/world.hpp"

using namespace gridrl;
using namespace gridrl::deathmatch;

namespace {

// Hall split by a 7-wide interior wall; columns 4 and 12 keep it connected.
constexpr const char* kPillarMap =
    "#################\n"
    "#hh#.........#ww#\n"
    "#h.r.........b.a#\n"
    "####.........####\n"
    "####.#######.####\n"
    "####.........####\n"
    "####.........####\n"
    "#h.r.........b.a#\n"
    "#hh#.........#aw#\n"
    "#################\n";

Config quiet(const char* layout = kDefaultMap) {
  Config c;
  c.layout = layout;
  c.action_period = 1;
  c.enemy_period = 1;
  c.max_enemies = 0;
  return c;
}

WorldState staged(const World& w, Cell at, Facing facing) {
  WorldState s;
  s.cells = w.layout().cells;
  s.agent = {at, facing, w.config().agent_health, w.config().pistol_damage, w.config().start_ammo, 0};
  return s;
}

std::vector<int> levels(const Frame& f) {
  std::vector<int> out;
  for (double v : f.pixels) out.push_back(static_cast<int>(std::lround(v * 255.0)));
  return out;
}

struct EpisodeOutcome {
  double score = 0.0;
  std::size_t steps = 0;
  bool died = false;
};

EpisodeOutcome play(MiniDeathmatch& env, const FramePolicy& policy) {
  EpisodeOutcome out;
  Frame f = env.reset();
  for (;;) {
    const auto s = env.step(policy(f));
    out.score += s.reward;
    ++out.steps;
    f = s.observation;
    if (s.terminal) break;
  }
  out.died = env.died();
  return out;
}

}  // namespace

TEST(Layout, DefaultAndSmallMaps) {
  for (const auto& [text, hall] : {std::pair{kDefaultMap, 121u}, std::pair{kSmallMap, 35u}}) {
    const auto m = parse_map(text);
    EXPECT_EQ(m.hall.size(), hall);
    ASSERT_EQ(m.rooms.size(), 4u);
    int red = 0;
    for (const auto& r : m.rooms) {
      red += r.color == RoomColor::red;
      EXPECT_EQ(m.at(r.entry), CellKind::room_floor);
    }
    EXPECT_EQ(red, 2);
    for (const Cell c : m.hall) EXPECT_EQ(m.at(c), CellKind::hall_floor);
    // Every walkable cell is reachable from the hall.
    std::set<Cell> seen{m.hall.front()};
    std::queue<Cell> q;
    q.push(m.hall.front());
    while (!q.empty()) {
      const Cell u = q.front();
      q.pop();
      for (int k = 0; k < 4; ++k) {
        const Cell d = forward_of(static_cast<Facing>(k));
        const Cell v{u.x + d.x, u.y + d.y};
        if (walkable(m.at(v)) && seen.insert(v).second) q.push(v);
      }
    }
    std::size_t walkable_cells = 0;
    for (auto k : m.cells) walkable_cells += walkable(k);
    EXPECT_EQ(seen.size(), walkable_cells);
  }
}

TEST(Layout, RejectsBadMaps) {
  EXPECT_THROW(parse_map("#####\n#.x.#\n#####\n"), ValidationError);
  EXPECT_THROW(parse_map(""), ValidationError);
  EXPECT_THROW(parse_map("###\n#.#\n##\n"), ValidationError);
  // Only three rooms.
  EXPECT_THROW(parse_map("#############\n"
                         "#hh#.....#ww#\n"
                         "#h.r.....b.a#\n"
                         "####.....####\n"
                         "#h.r.....#..#\n"
                         "#############\n"),
               ValidationError);
  // Item lying in the hall.
  std::string hall_item = kSmallMap;
  hall_item[hall_item.find("####.....####") + 5] = 'h';
  EXPECT_THROW(parse_map(hall_item), ValidationError);
  // Ammo in a health room.
  std::string mixed = kSmallMap;
  mixed[mixed.find("#hh#") + 1] = 'a';
  EXPECT_THROW(parse_map(mixed), ValidationError);
}

TEST(Actions, ExactlySeven) {
  MiniDeathmatch env;
  EXPECT_EQ(env.action_count(), 7u);
  EXPECT_STREQ(action_name(kTurnRight), "turn_right");
}

TEST(Reset, SameSeedSameState) {
  MiniDeathmatch a(small_config()), b(small_config());
  a.reset(99);
  b.reset(99);
  EXPECT_EQ(a.state(), b.state());
  for (int t = 0; t < 300; ++t) {
    const std::size_t act = static_cast<std::size_t>(t * 5 % 7);
    const auto sa = a.step(act), sb = b.step(act);
    ASSERT_EQ(sa.observation, sb.observation);
    ASSERT_EQ(sa.reward, sb.reward);
    if (sa.terminal) break;
  }
  EXPECT_EQ(a.state(), b.state());
}

TEST(Reset, PlacementUniformOverHall) {
  MiniDeathmatch env(small_config(), 5);
  const auto& hall = env.world().layout().hall;
  std::map<Cell, double> counts;
  std::vector<double> facing(4, 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    env.reset();
    const auto& a = env.state().agent;
    ASSERT_TRUE(std::find(hall.begin(), hall.end(), a.position) != hall.end()) << "spawned outside the hall";
    counts[a.position] += 1.0;
    facing[static_cast<int>(a.facing)] += 1.0;
    EXPECT_TRUE(env.state().enemies.empty());
  }
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / hall.size();
  for (const Cell c : hall) chi2 += (counts[c] - expected) * (counts[c] - expected) / expected;
  EXPECT_LT(chi2, 56.061);  // df 34, p = 0.01
  double chi2_facing = 0.0;
  for (double c : facing) chi2_facing += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
  EXPECT_LT(chi2_facing, 11.345);  // df 3
}

TEST(Step, KillAdjacentEnemy) {
  MiniDeathmatch env(quiet());
  env.reset(1);
  WorldState s = staged(env.world(), {9, 6}, Facing::north);
  s.enemies.push_back({{9, 5}, EnemyKind::melee, 1, 0});
  env.set_state(s);
  const auto r = env.step(kAttack);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_TRUE(env.state().enemies.empty());
  EXPECT_EQ(env.state().agent.ammo, 19);
  EXPECT_EQ(env.state().kills, 1u);
}

TEST(Step, TougherEnemyNeedsThreePistolShots) {
  MiniDeathmatch env(quiet());
  env.reset(1);
  WorldState s = staged(env.world(), {9, 9}, Facing::north);
  s.enemies.push_back({{9, 5}, EnemyKind::ranged, 3, 1000});
  env.set_state(s);
  EXPECT_EQ(env.step(kAttack).reward, 0.0);
  EXPECT_EQ(env.step(kAttack).reward, 0.0);
  EXPECT_EQ(env.step(kAttack).reward, 1.0);
  // Out of range (6 cells) or without ammo nothing is hit.
  s = staged(env.world(), {9, 11}, Facing::north);
  s.enemies.push_back({{9, 5}, EnemyKind::melee, 1, 1000});
  env.set_state(s);
  EXPECT_EQ(env.step(kAttack).reward, 0.0);
  s = staged(env.world(), {9, 6}, Facing::north);
  s.agent.ammo = 0;
  s.enemies.push_back({{9, 5}, EnemyKind::melee, 1, 1000});
  env.set_state(s);
  EXPECT_EQ(env.step(kAttack).reward, 0.0);
  EXPECT_EQ(env.state().enemies.size(), 1u);
}

TEST(Step, WallBlocksMovementAndShots) {
  MiniDeathmatch env(quiet(kPillarMap));
  env.reset(2);
  WorldState s = staged(env.world(), {8, 5}, Facing::north);
  s.enemies.push_back({{8, 3}, EnemyKind::melee, 1, 1000});
  env.set_state(s);
  const auto r = env.step(kMoveForward);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(env.state().agent.position, (Cell{8, 5}));
  EXPECT_EQ(env.step(kAttack).reward, 0.0);
  EXPECT_EQ(env.state().enemies.size(), 1u);
}

TEST(Step, MovementIsEgocentric) {
  MiniDeathmatch env(quiet());
  env.reset(3);
  env.set_state(staged(env.world(), {9, 6}, Facing::east));
  env.step(kMoveForward);
  EXPECT_EQ(env.state().agent.position, (Cell{10, 6}));
  env.step(kMoveLeft);  // left of east is north
  EXPECT_EQ(env.state().agent.position, (Cell{10, 5}));
  env.step(kMoveRight);
  env.step(kMoveBackward);
  EXPECT_EQ(env.state().agent.position, (Cell{9, 6}));
  env.step(kTurnLeft);
  EXPECT_EQ(env.state().agent.facing, Facing::north);
  env.step(kTurnRight);
  env.step(kTurnRight);
  EXPECT_EQ(env.state().agent.facing, Facing::south);
}

TEST(Step, ActionPeriodGatesActions) {
  Config c = quiet();
  c.action_period = 6;
  MiniDeathmatch env(c);
  env.reset(4);
  env.set_state(staged(env.world(), {9, 6}, Facing::north));
  for (int t = 0; t < 12; ++t) env.step(kTurnRight);
  EXPECT_EQ(env.state().agent.facing, Facing::south);  // two effective turns
}

TEST(Step, ItemsApplyOnceAndEnemiesHurt) {
  MiniDeathmatch env(quiet());
  env.reset(5);
  // Agent in the top-left health room entrance, walking west onto items.
  WorldState s = staged(env.world(), {3, 2}, Facing::west);
  s.agent.health = 30;
  env.set_state(s);
  env.step(kMoveForward);  // (2,2) plain room floor
  env.step(kMoveForward);  // (1,2) health item
  EXPECT_EQ(env.state().agent.health, 80);
  env.step(kMoveBackward);
  env.step(kMoveForward);
  EXPECT_EQ(env.state().agent.health, 80);  // consumed
  env.step(kTurnRight);
  env.step(kMoveForward);  // (1,1) health item, capped at 100
  EXPECT_EQ(env.state().agent.health, 100);

  // Weapon and ammo room, top right: entry at (15,2), ammo at (17,2), weapons above.
  s = staged(env.world(), {15, 2}, Facing::east);
  env.set_state(s);
  env.step(kMoveForward);
  env.step(kMoveForward);  // (17,2) ammo
  EXPECT_EQ(env.state().agent.ammo, 40);
  env.step(kMoveLeft);  // (17,1) weapon
  EXPECT_EQ(env.state().agent.damage, 3);

  // A melee enemy beside the agent deals 10 per action.
  Config hurt = quiet();
  hurt.enemy_random_move = 0.0;
  MiniDeathmatch env2(hurt);
  env2.reset(6);
  s = staged(env2.world(), {9, 6}, Facing::north);
  s.agent.health = 20;
  s.enemies.push_back({{10, 6}, EnemyKind::melee, 1, 0});
  env2.set_state(s);
  EXPECT_FALSE(env2.step(kTurnLeft).terminal);
  EXPECT_EQ(env2.state().agent.health, 10);
  const auto last = env2.step(kTurnLeft);
  EXPECT_TRUE(last.terminal);
  EXPECT_EQ(last.reward, 0.0);  // no signal on death
  EXPECT_TRUE(env2.died());
  EXPECT_THROW(env2.step(kAttack), UsageError);
}

TEST(Step, DeathPenaltyFlag) {
  Config c = quiet();
  c.enemy_random_move = 0.0;
  c.death_penalty = 1.0;
  MiniDeathmatch env(c);
  env.reset(7);
  WorldState s = staged(env.world(), {9, 6}, Facing::north);
  s.agent.health = 10;
  s.enemies.push_back({{9, 7}, EnemyKind::melee, 1, 0});
  env.set_state(s);
  EXPECT_EQ(env.step(kTurnLeft).reward, -1.0);
}

TEST(Step, RangedEnemyNeedsLineOfSight) {
  Config c = quiet(kPillarMap);
  c.enemy_random_move = 0.0;
  MiniDeathmatch env(c);
  env.reset(8);
  WorldState s = staged(env.world(), {8, 5}, Facing::south);
  s.enemies.push_back({{8, 3}, EnemyKind::ranged, 3, 0});  // two cells away, wall between
  env.set_state(s);
  env.step(kTurnLeft);
  EXPECT_EQ(env.state().agent.health, 100);
  s.enemies[0].position = {8, 8};  // three cells, open hall
  env.set_state(s);
  env.step(kTurnLeft);
  EXPECT_EQ(env.state().agent.health, 90);
}

TEST(Step, EpisodeCap) {
  Config c = quiet();
  c.episode_cap = 100;
  MiniDeathmatch env(c);
  env.reset(9);
  for (int t = 1; t < 100; ++t) ASSERT_FALSE(env.step(kTurnLeft).terminal);
  EXPECT_TRUE(env.step(kTurnLeft).terminal);
  EXPECT_FALSE(env.died());
}

TEST(Simulation, RandomPolicyRewardAlphabetAndTermination) {
  MiniDeathmatch env(small_config(), 10);
  const auto policy = random_frame_policy(11);
  std::size_t total_steps = 0;
  while (total_steps < 10000) {
    Frame f = env.reset();
    double score = 0.0;
    std::size_t steps = 0;
    bool terminal = false;
    while (!terminal) {
      const auto s = env.step(policy(f));
      ASSERT_TRUE(s.reward == 0.0 || s.reward == 1.0);
      score += s.reward;
      ++steps;
      terminal = s.terminal;
      f = s.observation;
      ASSERT_LE(env.state().enemies.size(), 5u);
      ASSERT_GT(env.state().agent.health, terminal ? -1000 : 0);
    }
    EXPECT_TRUE(env.died() || steps == 10000u);
    EXPECT_LE(steps, 10000u);
    EXPECT_EQ(score, static_cast<double>(env.state().kills));
    total_steps += steps;
  }
}

TEST(Render, ShapeAndLevels) {
  MiniDeathmatch env;
  const Frame f = env.reset(12);
  EXPECT_EQ(env.frame_shape(), (Shape{30, 40, 1}));
  EXPECT_EQ(f.height, 30u);
  EXPECT_EQ(f.width, 40u);
  const std::set<int> allowed{gray::wall,   gray::hall, gray::room,        gray::health,
                              gray::weapon, gray::ammo, gray::melee_enemy, gray::ranged_enemy};
  for (int v : levels(f)) EXPECT_TRUE(allowed.count(v)) << v;
}

TEST(Render, WallAtDistanceOneOccludesEverything) {
  World w(quiet(kPillarMap));
  const WorldState s = staged(w, {8, 5}, Facing::north);
  for (int d = 1; d <= 10; ++d)
    for (int x = -3; x <= 3; ++x) EXPECT_EQ(w.window_level(s, x, d), gray::wall) << x << "," << d;
  // From the other side of the pillar the hall beyond is visible.
  const WorldState open = staged(w, {8, 8}, Facing::north);
  EXPECT_EQ(w.window_level(open, 0, 1), gray::hall);
  EXPECT_EQ(w.window_level(open, 0, 4), gray::wall);  // the pillar itself
  EXPECT_EQ(w.window_level(open, 0, 5), gray::wall);  // hidden behind it
}

TEST(Render, FourLeftTurnsRestoreObservation) {
  MiniDeathmatch env(quiet());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Frame start = env.reset(seed);
    Frame f = start;
    for (int i = 0; i < 4; ++i) f = env.step(kTurnLeft).observation;
    EXPECT_EQ(f, start);
  }
}

TEST(Render, EnemyAheadMatchesFixture) {
  World w(quiet());
  WorldState s = staged(w, {9, 9}, Facing::north);
  s.enemies.push_back({{9, 6}, EnemyKind::melee, 1, 0});
  std::ifstream in(std::string(GRIDRL_FIXTURES) + "/deathmatch_enemy_ahead.pgm", std::ios::binary);
  ASSERT_TRUE(in) << "missing fixture";
  const RawFrame expected = read_pgm_raw(in);
  ASSERT_EQ(expected.height, 30u);
  ASSERT_EQ(expected.width, 40u);
  EXPECT_EQ(levels(w.render(s)), expected.pixels);
}

TEST(Render, OutOfViewCellsNeverMatter) {
  World w(Config{});
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Cell at = w.layout().hall[uniform_index(rng, w.layout().hall.size())];
    WorldState s = staged(w, at, static_cast<Facing>(uniform_index(rng, 4)));
    const Frame base = w.render(s);
    std::set<Cell> window;
    for (int d = 1; d <= 10; ++d)
      for (int x = -3; x <= 3; ++x) window.insert(w.window_cell(s, x, d));
    for (int y = 0; y < w.layout().height; ++y)
      for (int x = 0; x < w.layout().width; ++x) {
        const Cell c{x, y};
        if (window.count(c) || c == at) continue;
        WorldState p = s;
        auto& k = p.cells[w.layout().index(c)];
        k = k == CellKind::wall ? CellKind::hall_floor : CellKind::wall;
        ASSERT_EQ(w.render(p), base) << "cell " << x << "," << y;
        WorldState e = s;
        if (walkable(w.layout().at(c))) {
          e.enemies.push_back({c, EnemyKind::ranged, 3, 0});
          ASSERT_EQ(w.render(e), base);
        }
      }
  }
}

TEST(Render, OccludedEnemyIsHidden) {
  World w(quiet(kPillarMap));
  WorldState s = staged(w, {8, 5}, Facing::north);
  s.enemies.push_back({{8, 3}, EnemyKind::melee, 1, 0});
  EXPECT_FALSE(frame_shows_enemy(w.render(s)));
  s.agent.position = {8, 7};
  s.enemies[0].position = {8, 5};
  EXPECT_TRUE(frame_shows_enemy(w.render(s)));
}

TEST(Scripted, TurnAndShootScoresZeroWithoutEnemies) {
  Config c = small_config();
  c.max_enemies = 0;
  c.episode_cap = 2000;
  MiniDeathmatch env(c, 14);
  const auto policy = turn_and_shoot_policy();
  for (int e = 0; e < 5; ++e) EXPECT_EQ(play(env, policy).score, 0.0);
}

TEST(Scripted, TurnAndShootBeatsRandom) {
  MiniDeathmatch env(small_config(), 15);
  const auto scripted = turn_and_shoot_policy();
  const auto random = random_frame_policy(16);
  double scripted_total = 0.0, random_total = 0.0;
  for (int e = 0; e < 100; ++e) scripted_total += play(env, scripted).score;
  for (int e = 0; e < 100; ++e) random_total += play(env, random).score;
  EXPECT_GT(scripted_total / 100.0, random_total / 100.0);
}

TEST(Config, Validation) {
  Config c;
  c.view_width = 6;
  EXPECT_THROW(c.validate(), ConfigError);
  c = Config{};
  c.action_period = 0;
  EXPECT_THROW(MiniDeathmatch{c}, ConfigError);
  c = Config{};
  c.enemy_random_move = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}
