#pragma once

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/core/environment.hpp"
#include "gridrl/core/mdp.hpp"

namespace gridrl {

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Deterministic 4-connected maze. Entering a goal cell pays its reward and
/// ends the episode; moving into a wall or off the grid leaves the agent put.
struct GridWorld {
  int width = 0;
  int height = 0;
  std::set<Cell> walls;
  std::map<Cell, double> goals;
  Cell start;

  enum Action : std::size_t { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

  void validate() const {
    if (width < 1 || height < 1) throw ValidationError("GridWorld: empty grid");
    if (goals.empty()) throw ValidationError("GridWorld: at least one goal is required");
    if (!inside(start)) throw ValidationError("GridWorld: start outside the grid");
    if (walls.count(start)) throw ValidationError("GridWorld: start is a wall");
    for (const auto& [cell, reward] : goals) {
      if (!inside(cell)) throw ValidationError("GridWorld: goal outside the grid");
      if (walls.count(cell)) throw ValidationError("GridWorld: goal is a wall");
    }
  }

  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool blocked(Cell c) const { return !inside(c) || walls.count(c) > 0; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y * width + c.x); }
  Cell cell(std::size_t index) const {
    return {static_cast<int>(index % static_cast<std::size_t>(width)),
            static_cast<int>(index / static_cast<std::size_t>(width))};
  }
  std::size_t state_count() const { return static_cast<std::size_t>(width * height); }

  Cell move(Cell from, std::size_t action) const {
    static constexpr int dx[4] = {0, 1, 0, -1};
    static constexpr int dy[4] = {-1, 0, 1, 0};
    const Cell to{from.x + dx[action], from.y + dy[action]};
    return blocked(to) ? from : to;
  }
};

/// '#' wall, '.' floor, 'S' start, '1'-'9' goal paying the digit.
inline GridWorld parse_grid_world(const std::string& text) {
  GridWorld grid;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw ValidationError("GridWorld map: no rows");
  grid.height = static_cast<int>(rows.size());
  grid.width = static_cast<int>(rows.front().size());
  bool have_start = false;
  for (int y = 0; y < grid.height; ++y) {
    if (static_cast<int>(rows[y].size()) != grid.width) throw ValidationError("GridWorld map: ragged rows");
    for (int x = 0; x < grid.width; ++x) {
      const char ch = rows[y][x];
      if (ch == '#') {
        grid.walls.insert({x, y});
      } else if (ch == 'S') {
        if (have_start) throw ValidationError("GridWorld map: more than one start");
        grid.start = {x, y};
        have_start = true;
      } else if (ch >= '1' && ch <= '9') {
        grid.goals[{x, y}] = static_cast<double>(ch - '0');
      } else if (ch != '.') {
        throw ValidationError(std::string("GridWorld map: unknown character '") + ch + "'");
      }
    }
  }
  if (!have_start) throw ValidationError("GridWorld map: no start cell");
  grid.validate();
  return grid;
}

class GridWorldEnv : public DiscreteEnvironment {
 public:
  explicit GridWorldEnv(GridWorld grid) : grid_(std::move(grid)) { grid_.validate(); }

  std::size_t action_count() const override { return 4; }
  std::size_t state_count() const override { return grid_.state_count(); }
  void reseed(std::uint64_t) override {}
  const GridWorld& grid() const { return grid_; }
  Cell position() const { return pos_; }

 protected:
  std::size_t do_reset() override {
    pos_ = grid_.start;
    return grid_.index(pos_);
  }

  Step<std::size_t> do_step(std::size_t action) override {
    pos_ = grid_.move(pos_, action);
    const auto goal = grid_.goals.find(pos_);
    if (goal != grid_.goals.end()) return {grid_.index(pos_), goal->second, true};
    return {grid_.index(pos_), 0.0, false};
  }

 private:
  GridWorld grid_;
  Cell pos_;
};

inline std::unique_ptr<GridWorldEnv> grid_as_environment(const GridWorld& grid) {
  return std::make_unique<GridWorldEnv>(grid);
}

/// Exact model of the grid: goal cells and walls are absorbing terminals.
inline TabularMdp grid_as_tabular(const GridWorld& grid, double discount) {
  grid.validate();
  const std::size_t n = grid.state_count();
  std::vector<double> probs(n * 4 * n, 0.0);
  std::vector<double> rewards(n * 4, 0.0);
  std::set<std::size_t> terminals;
  for (std::size_t s = 0; s < n; ++s) {
    const Cell c = grid.cell(s);
    if (grid.walls.count(c) || grid.goals.count(c)) {
      terminals.insert(s);
      continue;
    }
    for (std::size_t a = 0; a < 4; ++a) {
      const Cell to = grid.move(c, a);
      probs[(s * 4 + a) * n + grid.index(to)] = 1.0;
      const auto goal = grid.goals.find(to);
      if (goal != grid.goals.end()) rewards[s * 4 + a] = goal->second;
    }
  }
  return TabularMdp(n, 4, std::move(probs), std::move(rewards), grid.index(grid.start), discount,
                    std::move(terminals));
}

}  // namespace gridrl
