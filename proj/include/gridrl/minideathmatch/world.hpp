#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gridrl/core/random.hpp"
#include "gridrl/minideathmatch/layout.hpp"
#include "gridrl/preprocess/pipeline.hpp"

namespace gridrl::deathmatch {

enum Action : std::size_t {
  kAttack = 0,
  kMoveLeft = 1,
  kMoveRight = 2,
  kMoveForward = 3,
  kMoveBackward = 4,
  kTurnLeft = 5,
  kTurnRight = 6,
};
inline constexpr std::size_t kActionCount = 7;

inline const char* action_name(std::size_t a) {
  static constexpr std::array<const char*, kActionCount> names{
      "attack", "move_left", "move_right", "move_forward", "move_backward", "turn_left", "turn_right"};
  return a < kActionCount ? names[a] : "?";
}

enum class Facing : std::uint8_t { north = 0, east = 1, south = 2, west = 3 };

inline Cell forward_of(Facing f) {
  static constexpr int dx[4] = {0, 1, 0, -1};
  static constexpr int dy[4] = {-1, 0, 1, 0};
  return {dx[static_cast<int>(f)], dy[static_cast<int>(f)]};
}
inline Facing turned(Facing f, int quarter_turns_right) {
  return static_cast<Facing>(((static_cast<int>(f) + quarter_turns_right) % 4 + 4) % 4);
}

enum class EnemyKind : std::uint8_t { melee, ranged };

/// Gray levels (0..255) of the rendered classes. Occluded cells and anything
/// off the map draw as wall.
namespace gray {
inline constexpr int wall = 60;
inline constexpr int hall = 120;
inline constexpr int room = 140;
inline constexpr int health = 170;
inline constexpr int weapon = 190;
inline constexpr int ammo = 210;
inline constexpr int melee_enemy = 235;
inline constexpr int ranged_enemy = 255;
}  // namespace gray

struct Config {
  std::string layout = kDefaultMap;
  int agent_health = 100;
  int enemy_damage = 10;
  int health_item = 50;
  int pistol_damage = 1;
  int weapon_damage = 3;
  int start_ammo = 20;
  int ammo_item = 20;
  int attack_range = 5;
  int melee_hit_points = 1;
  int ranged_hit_points = 3;
  int melee_range = 1;
  int ranged_range = 4;
  double enemy_random_move = 0.2;
  std::size_t spawn_interval = 50;
  std::size_t max_enemies = 5;
  std::size_t episode_cap = 10000;
  /// Frames between effective agent actions; actions arriving in between are
  /// ignored. Matches the default history depth so that one repeated action
  /// takes effect once per stack.
  std::size_t action_period = 6;
  /// Frames between enemy actions; each enemy starts at a random phase.
  std::size_t enemy_period = 6;
  std::size_t view_width = 7;
  std::size_t view_depth = 10;
  std::size_t raster_height = 30;
  std::size_t raster_width = 40;
  /// Reward on death; zero keeps the reward alphabet {0, +1}.
  double death_penalty = 0.0;

  void validate() const {
    auto positive = [](long long v, const char* name) {
      if (v <= 0) throw ConfigError(std::string("minideathmatch: ") + name + " must be positive");
    };
    positive(agent_health, "agent_health");
    positive(pistol_damage, "pistol_damage");
    positive(weapon_damage, "weapon_damage");
    positive(attack_range, "attack_range");
    positive(melee_hit_points, "melee_hit_points");
    positive(ranged_hit_points, "ranged_hit_points");
    positive(static_cast<long long>(spawn_interval), "spawn_interval");
    positive(static_cast<long long>(episode_cap), "episode_cap");
    positive(static_cast<long long>(action_period), "action_period");
    positive(static_cast<long long>(enemy_period), "enemy_period");
    positive(static_cast<long long>(view_depth), "view_depth");
    positive(static_cast<long long>(raster_height), "raster_height");
    positive(static_cast<long long>(raster_width), "raster_width");
    if (view_width % 2 == 0) throw ConfigError("minideathmatch: view_width must be odd");
    if (start_ammo < 0 || ammo_item < 0 || health_item < 0 || enemy_damage < 0) {
      throw ConfigError("minideathmatch: amounts must be non-negative");
    }
    if (!(enemy_random_move >= 0.0 && enemy_random_move <= 1.0)) {
      throw ConfigError("minideathmatch: enemy_random_move must lie in [0, 1]");
    }
  }
};

/// Configuration of the "minideathmatch_small" environment id.
inline Config small_config() {
  Config c;
  c.layout = kSmallMap;
  return c;
}

struct AgentState {
  Cell position;
  Facing facing = Facing::north;
  int health = 0;
  int damage = 0;
  int ammo = 0;
  std::size_t cooldown = 0;
  bool operator==(const AgentState&) const = default;
};

struct Enemy {
  Cell position;
  EnemyKind kind = EnemyKind::melee;
  int hit_points = 0;
  std::size_t cooldown = 0;
  bool operator==(const Enemy&) const = default;
};

struct WorldState {
  AgentState agent;
  std::vector<Enemy> enemies;
  /// Current cell kinds; consumed items revert to room floor.
  std::vector<CellKind> cells;
  std::size_t step_count = 0;
  std::size_t kills = 0;
  bool operator==(const WorldState&) const = default;
};

namespace detail {

inline long long round_away(double v) { return std::lround(v); }

/// Walls strictly between the agent and window cell (x, d), in window
/// coordinates (x lateral, d depth). Samples the centre-to-centre segment and
/// ignores the agent's own row, so only cells inside the window matter.
template <class IsWall>
bool occluded(int x, int d, IsWall&& is_wall) {
  const double len = std::sqrt(static_cast<double>(x * x + d * d));
  const int n = static_cast<int>(std::ceil(len * 8.0));
  for (int i = 1; i < n; ++i) {
    const long long sx = round_away(static_cast<double>(x) * i / n);
    const long long sd = round_away(static_cast<double>(d) * i / n);
    if (sd < 1 || (sx == x && sd == d)) continue;
    if (is_wall(static_cast<int>(sx), static_cast<int>(sd))) return true;
  }
  return false;
}

}  // namespace detail

/// The simulator. One step is one frame.
class World {
 public:
  explicit World(Config config = {}) : config_(std::move(config)), layout_(parse_map(config_.layout)) {
    config_.validate();
  }

  const Config& config() const { return config_; }
  const MapLayout& layout() const { return layout_; }
  const WorldState& state() const { return state_; }

  /// Replaces the state, e.g. to stage a scenario in tests.
  void set_state(WorldState s) {
    if (s.cells.size() != layout_.cells.size()) throw ValidationError("World: cell array does not match the layout");
    auto check_floor = [&](Cell c) {
      if (!walkable(kind(s, c))) throw ValidationError("World: entity placed on a wall");
    };
    check_floor(s.agent.position);
    for (const auto& e : s.enemies) {
      check_floor(e.position);
      if (e.position == s.agent.position) throw ValidationError("World: enemy shares the agent's cell");
    }
    state_ = std::move(s);
  }

  void reset(Rng& rng) {
    state_ = {};
    state_.cells = layout_.cells;
    const Cell start = layout_.hall[uniform_index(rng, layout_.hall.size())];
    state_.agent = {start, static_cast<Facing>(uniform_index(rng, 4)), config_.agent_health, config_.pistol_damage,
                    config_.start_ammo, 0};
  }

  struct StepResult {
    double reward = 0.0;
    bool terminal = false;
    bool died = false;
  };

  StepResult step(std::size_t action, Rng& rng) {
    if (action >= kActionCount) throw ParameterError("World: action out of range");
    StepResult r;
    auto& a = state_.agent;
    if (a.cooldown > 0) {
      --a.cooldown;
    } else {
      r.reward += act(action);
      a.cooldown = config_.action_period - 1;
    }
    for (auto& e : state_.enemies) {
      if (e.cooldown > 0) {
        --e.cooldown;
        continue;
      }
      e.cooldown = config_.enemy_period - 1;
      enemy_act(e, rng);
    }
    ++state_.step_count;
    if (state_.step_count % config_.spawn_interval == 0 && state_.enemies.size() < config_.max_enemies) spawn(rng);
    if (a.health <= 0) {
      r.terminal = r.died = true;
      r.reward -= config_.death_penalty;
    } else if (state_.step_count >= config_.episode_cap) {
      r.terminal = true;
    }
    return r;
  }

  /// Window cell (x lateral, d depth >= 1) in world coordinates.
  Cell window_cell(const WorldState& s, int x, int d) const {
    const Cell f = forward_of(s.agent.facing);
    const Cell rt = forward_of(turned(s.agent.facing, 1));
    return {s.agent.position.x + d * f.x + x * rt.x, s.agent.position.y + d * f.y + x * rt.y};
  }

  /// Gray level of window cell (x, d) with occlusion applied.
  int window_level(const WorldState& s, int x, int d) const {
    auto is_wall = [&](int cx, int cd) { return !walkable(kind(s, window_cell(s, cx, cd))); };
    if (is_wall(x, d) || detail::occluded(x, d, is_wall)) return gray::wall;
    const Cell c = window_cell(s, x, d);
    for (const auto& e : s.enemies)
      if (e.position == c) return e.kind == EnemyKind::melee ? gray::melee_enemy : gray::ranged_enemy;
    switch (kind(s, c)) {
      case CellKind::hall_floor: return gray::hall;
      case CellKind::room_floor: return gray::room;
      case CellKind::health_item: return gray::health;
      case CellKind::weapon_item: return gray::weapon;
      case CellKind::ammo_item: return gray::ammo;
      case CellKind::wall: break;
    }
    return gray::wall;
  }

  /// Egocentric forward view: window row d = view_depth at the top, d = 1 at
  /// the bottom; lateral offset -w/2 at the left.
  Frame render(const WorldState& s) const {
    const std::size_t h = config_.raster_height, w = config_.raster_width;
    const int depth = static_cast<int>(config_.view_depth), width = static_cast<int>(config_.view_width);
    std::vector<int> levels(static_cast<std::size_t>(depth * width));
    for (int d = 1; d <= depth; ++d)
      for (int x = -width / 2; x <= width / 2; ++x)
        levels[static_cast<std::size_t>((d - 1) * width + x + width / 2)] = window_level(s, x, d);
    Frame f(h, w, 1);
    for (std::size_t py = 0; py < h; ++py) {
      const int d = depth - static_cast<int>(py * static_cast<std::size_t>(depth) / h);
      for (std::size_t px = 0; px < w; ++px) {
        const int col = static_cast<int>(px * static_cast<std::size_t>(width) / w);
        f.at(py, px) = levels[static_cast<std::size_t>((d - 1) * width + col)] / 255.0;
      }
    }
    return f;
  }
  Frame render() const { return render(state_); }

  /// Top-down map with the agent as an arrow, enemies as 'm'/'R'.
  std::string ascii(const WorldState& s) const {
    std::string out;
    for (int y = 0; y < layout_.height; ++y) {
      for (int x = 0; x < layout_.width; ++x) {
        const Cell c{x, y};
        char ch = '.';
        switch (kind(s, c)) {
          case CellKind::wall: ch = '#'; break;
          case CellKind::room_floor: ch = ','; break;
          case CellKind::health_item: ch = 'h'; break;
          case CellKind::weapon_item: ch = 'w'; break;
          case CellKind::ammo_item: ch = 'a'; break;
          case CellKind::hall_floor: break;
        }
        for (const auto& e : s.enemies)
          if (e.position == c) ch = e.kind == EnemyKind::melee ? 'm' : 'R';
        if (s.agent.position == c) ch = "^>v<"[static_cast<int>(s.agent.facing)];
        out += ch;
      }
      out += '\n';
    }
    out += "health " + std::to_string(s.agent.health) + "  ammo " + std::to_string(s.agent.ammo) + "  damage " +
           std::to_string(s.agent.damage) + "  kills " + std::to_string(s.kills) + "  step " +
           std::to_string(s.step_count) + "\n";
    return out;
  }

 private:
  CellKind kind(const WorldState& s, Cell c) const {
    return layout_.inside(c) ? s.cells[layout_.index(c)] : CellKind::wall;
  }

  bool free_for_move(Cell c, const Enemy* self) const {
    if (!walkable(kind(state_, c))) return false;
    if (c == state_.agent.position) return false;
    for (const auto& e : state_.enemies)
      if (&e != self && e.position == c) return false;
    return true;
  }

  bool clear_line(Cell from, Cell to) const {
    const int dx = to.x - from.x, dy = to.y - from.y;
    const double len = std::sqrt(static_cast<double>(dx * dx + dy * dy));
    const int n = static_cast<int>(std::ceil(len * 8.0));
    for (int i = 1; i < n; ++i) {
      const Cell c{from.x + static_cast<int>(detail::round_away(static_cast<double>(dx) * i / n)),
                   from.y + static_cast<int>(detail::round_away(static_cast<double>(dy) * i / n))};
      if (c == from || c == to) continue;
      if (!walkable(kind(state_, c))) return false;
    }
    return true;
  }

  double act(std::size_t action) {
    auto& a = state_.agent;
    const Cell f = forward_of(a.facing);
    const Cell rt = forward_of(turned(a.facing, 1));
    Cell delta{0, 0};
    switch (action) {
      case kAttack: return attack();
      case kTurnLeft: a.facing = turned(a.facing, -1); return 0.0;
      case kTurnRight: a.facing = turned(a.facing, 1); return 0.0;
      case kMoveForward: delta = f; break;
      case kMoveBackward: delta = {-f.x, -f.y}; break;
      case kMoveLeft: delta = {-rt.x, -rt.y}; break;
      case kMoveRight: delta = rt; break;
      default: break;
    }
    const Cell to{a.position.x + delta.x, a.position.y + delta.y};
    if (!walkable(kind(state_, to))) return 0.0;
    for (const auto& e : state_.enemies)
      if (e.position == to) return 0.0;
    a.position = to;
    pick_up(to);
    return 0.0;
  }

  void pick_up(Cell c) {
    auto& a = state_.agent;
    auto& k = state_.cells[layout_.index(c)];
    switch (k) {
      case CellKind::health_item: a.health = std::min(config_.agent_health, a.health + config_.health_item); break;
      case CellKind::weapon_item: a.damage = std::max(a.damage, config_.weapon_damage); break;
      case CellKind::ammo_item: a.ammo += config_.ammo_item; break;
      default: return;
    }
    k = CellKind::room_floor;
  }

  double attack() {
    auto& a = state_.agent;
    if (a.ammo <= 0) return 0.0;
    --a.ammo;
    const Cell f = forward_of(a.facing);
    for (int d = 1; d <= config_.attack_range; ++d) {
      const Cell c{a.position.x + d * f.x, a.position.y + d * f.y};
      if (!walkable(kind(state_, c))) return 0.0;
      for (std::size_t i = 0; i < state_.enemies.size(); ++i) {
        auto& e = state_.enemies[i];
        if (e.position != c) continue;
        e.hit_points -= a.damage;
        if (e.hit_points > 0) return 0.0;
        state_.enemies.erase(state_.enemies.begin() + static_cast<std::ptrdiff_t>(i));
        ++state_.kills;
        return 1.0;
      }
    }
    return 0.0;
  }

  void enemy_act(Enemy& e, Rng& rng) {
    const Cell p = state_.agent.position;
    const int dx = p.x - e.position.x, dy = p.y - e.position.y;
    const bool random_move = bernoulli(rng, config_.enemy_random_move);
    if (!random_move) {
      bool in_range = false;
      if (e.kind == EnemyKind::melee) {
        in_range = std::abs(dx) + std::abs(dy) <= config_.melee_range;
      } else {
        in_range = dx * dx + dy * dy <= config_.ranged_range * config_.ranged_range && clear_line(e.position, p);
      }
      if (in_range) {
        state_.agent.health -= config_.enemy_damage;
        return;
      }
    }
    std::array<Cell, 2> options;
    std::size_t count = 0;
    if (random_move) {
      options[count++] = forward_of(static_cast<Facing>(uniform_index(rng, 4)));
    } else {
      const Cell horizontal{dx > 0 ? 1 : -1, 0}, vertical{0, dy > 0 ? 1 : -1};
      if (std::abs(dx) >= std::abs(dy)) {
        if (dx != 0) options[count++] = horizontal;
        if (dy != 0) options[count++] = vertical;
      } else {
        options[count++] = vertical;
        if (dx != 0) options[count++] = horizontal;
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      const Cell to{e.position.x + options[i].x, e.position.y + options[i].y};
      if (free_for_move(to, &e)) {
        e.position = to;
        return;
      }
    }
  }

  void spawn(Rng& rng) {
    std::vector<Cell> free;
    for (const Cell c : layout_.hall) {
      const Cell p = state_.agent.position;
      if (std::abs(c.x - p.x) + std::abs(c.y - p.y) < 2) continue;
      if (!free_for_move(c, nullptr)) continue;
      free.push_back(c);
    }
    if (free.empty()) return;
    Enemy e;
    e.position = free[uniform_index(rng, free.size())];
    e.kind = bernoulli(rng, 0.5) ? EnemyKind::melee : EnemyKind::ranged;
    e.hit_points = e.kind == EnemyKind::melee ? config_.melee_hit_points : config_.ranged_hit_points;
    e.cooldown = uniform_index(rng, config_.enemy_period);
    state_.enemies.push_back(e);
  }

  Config config_;
  MapLayout layout_;
  WorldState state_;
};

/// Frame environment over World. reset() places the agent uniformly on the
/// hall floor with a uniform facing; the RNG is reseeded only by reseed() or
/// reset(seed).
class MiniDeathmatch final : public FrameEnvironment {
 public:
  explicit MiniDeathmatch(Config config = {}, std::uint64_t seed = 0) : world_(std::move(config)), rng_(seed) {}

  std::size_t action_count() const override { return kActionCount; }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }
  Shape frame_shape() const override {
    return {world_.config().raster_height, world_.config().raster_width, 1};
  }

  World& world() { return world_; }
  const World& world() const { return world_; }
  const WorldState& state() const { return world_.state(); }
  /// Stages a scenario; the episode continues from it.
  void set_state(WorldState s) { world_.set_state(std::move(s)); }
  bool died() const { return died_; }

 protected:
  Frame do_reset() override {
    world_.reset(rng_);
    died_ = false;
    return world_.render();
  }

  Step<Frame> do_step(std::size_t action) override {
    const auto r = world_.step(action, rng_);
    died_ = r.died;
    return {world_.render(), r.reward, r.terminal};
  }

 private:
  World world_;
  Rng rng_;
  bool died_ = false;
};

/// Acts on rendered frames.
using FramePolicy = std::function<std::size_t(const Frame&)>;

inline FramePolicy random_frame_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const Frame&) { return uniform_index(*rng, kActionCount); };
}

inline bool frame_shows_enemy(const Frame& f) {
  for (double v : f.pixels) {
    const long level = std::lround(v * 255.0);
    if (level == gray::melee_enemy || level == gray::ranged_enemy) return true;
  }
  return false;
}

/// Turns left until an enemy is anywhere in view, then attacks.
inline FramePolicy turn_and_shoot_policy() {
  return [](const Frame& f) -> std::size_t { return frame_shows_enemy(f) ? kAttack : kTurnLeft; };
}

}  // namespace gridrl::deathmatch
