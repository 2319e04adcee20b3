#pragma once

#include <algorithm>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "gridrl/core/errors.hpp"
#include "gridrl/envs/grid_world.hpp"

namespace gridrl::deathmatch {

enum class CellKind : std::uint8_t { hall_floor, room_floor, wall, health_item, weapon_item, ammo_item };

inline bool walkable(CellKind k) { return k != CellKind::wall; }
inline bool is_item(CellKind k) {
  return k == CellKind::health_item || k == CellKind::weapon_item || k == CellKind::ammo_item;
}

enum class RoomColor { red, blue };

struct Room {
  RoomColor color;
  Cell entry;
  std::vector<Cell> cells;
};

/// Static map: one hall plus four side rooms, each reached through a single
/// entry cell. Item cells are room floor carrying an item.
struct MapLayout {
  int width = 0;
  int height = 0;
  std::vector<CellKind> cells;
  std::vector<Cell> hall;
  std::vector<Room> rooms;

  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y * width + c.x); }
  CellKind at(Cell c) const { return inside(c) ? cells[index(c)] : CellKind::wall; }
};

/// ASCII layout: '#' wall, '.' floor, 'h' health, 'w' weapon, 'a' ammo,
/// 'r' entry of a health room, 'b' entry of a weapon/ammo room. The largest
/// floor region not crossing an entry is the hall; every other region is a
/// room. Exactly two red and two blue rooms are required, each touching one
/// entry, and items may only lie inside rooms of the matching colour.
inline MapLayout parse_map(const std::string& text) {
  std::vector<std::string> rows;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) rows.push_back(line);
    }
  }
  if (rows.empty()) throw ValidationError("deathmatch map: no rows");
  MapLayout m;
  m.height = static_cast<int>(rows.size());
  m.width = static_cast<int>(rows.front().size());
  m.cells.assign(static_cast<std::size_t>(m.width * m.height), CellKind::wall);
  std::vector<char> raw(m.cells.size());
  for (int y = 0; y < m.height; ++y) {
    if (static_cast<int>(rows[y].size()) != m.width) throw ValidationError("deathmatch map: ragged rows");
    for (int x = 0; x < m.width; ++x) {
      const char ch = rows[y][x];
      const std::size_t i = m.index({x, y});
      raw[i] = ch;
      switch (ch) {
        case '#': m.cells[i] = CellKind::wall; break;
        case '.': case 'r': case 'b': m.cells[i] = CellKind::hall_floor; break;
        case 'h': m.cells[i] = CellKind::health_item; break;
        case 'w': m.cells[i] = CellKind::weapon_item; break;
        case 'a': m.cells[i] = CellKind::ammo_item; break;
        default: throw ValidationError(std::string("deathmatch map: unknown character '") + ch + "'");
      }
    }
  }
  auto is_entry = [&](Cell c) { return m.inside(c) && (raw[m.index(c)] == 'r' || raw[m.index(c)] == 'b'); };
  static constexpr int dx[4] = {0, 1, 0, -1};
  static constexpr int dy[4] = {-1, 0, 1, 0};

  // Regions of floor cells separated by walls and entries.
  std::vector<int> region(m.cells.size(), -1);
  std::vector<std::vector<Cell>> regions;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const Cell c{x, y};
      if (!walkable(m.at(c)) || is_entry(c) || region[m.index(c)] >= 0) continue;
      const int id = static_cast<int>(regions.size());
      regions.emplace_back();
      std::queue<Cell> q;
      q.push(c);
      region[m.index(c)] = id;
      while (!q.empty()) {
        const Cell u = q.front();
        q.pop();
        regions[id].push_back(u);
        for (int k = 0; k < 4; ++k) {
          const Cell v{u.x + dx[k], u.y + dy[k]};
          if (!m.inside(v) || !walkable(m.at(v)) || is_entry(v) || region[m.index(v)] >= 0) continue;
          region[m.index(v)] = id;
          q.push(v);
        }
      }
    }
  if (regions.size() != 5) {
    throw ValidationError("deathmatch map: expected one hall and four rooms, found " + std::to_string(regions.size()) +
                          " floor regions");
  }
  const auto hall_it = std::max_element(regions.begin(), regions.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
  const int hall_id = static_cast<int>(hall_it - regions.begin());
  m.hall = *hall_it;
  std::sort(m.hall.begin(), m.hall.end(), [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  for (const Cell c : m.hall)
    if (is_item(m.at(c))) throw ValidationError("deathmatch map: items must lie inside rooms");

  std::vector<int> entry_of(regions.size(), 0);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const Cell e{x, y};
      if (!is_entry(e)) continue;
      bool touches_hall = false;
      int room = -1;
      for (int k = 0; k < 4; ++k) {
        const Cell v{e.x + dx[k], e.y + dy[k]};
        if (!m.inside(v) || region[m.index(v)] < 0) continue;
        if (region[m.index(v)] == hall_id) {
          touches_hall = true;
        } else if (room >= 0 && room != region[m.index(v)]) {
          throw ValidationError("deathmatch map: an entry touches two rooms");
        } else {
          room = region[m.index(v)];
        }
      }
      if (!touches_hall || room < 0) throw ValidationError("deathmatch map: an entry must join the hall to one room");
      ++entry_of[room];
      Room r{raw[m.index(e)] == 'r' ? RoomColor::red : RoomColor::blue, e, regions[room]};
      m.cells[m.index(e)] = CellKind::room_floor;
      m.rooms.push_back(std::move(r));
    }
  for (std::size_t id = 0; id < regions.size(); ++id) {
    if (static_cast<int>(id) == hall_id) continue;
    if (entry_of[id] != 1) throw ValidationError("deathmatch map: every room needs exactly one entry");
  }
  int red = 0, blue = 0;
  for (auto& room : m.rooms) {
    bool health = false, gear = false;
    for (const Cell c : room.cells) {
      const CellKind k = m.at(c);
      if (k == CellKind::hall_floor) m.cells[m.index(c)] = CellKind::room_floor;
      health |= k == CellKind::health_item;
      gear |= k == CellKind::weapon_item || k == CellKind::ammo_item;
    }
    if (room.color == RoomColor::red) {
      ++red;
      if (!health || gear) throw ValidationError("deathmatch map: a red room must hold health items only");
    } else {
      ++blue;
      if (!gear || health) throw ValidationError("deathmatch map: a blue room must hold weapons or ammunition only");
    }
  }
  if (red != 2 || blue != 2) throw ValidationError("deathmatch map: need two red and two blue rooms");
  return m;
}

/// Large hall with two rooms on each side.
inline const char* kDefaultMap =
    "###################\n"
    "#hh#...........#ww#\n"
    "#h.r...........b.a#\n"
    "####...........####\n"
    "####...........####\n"
    "####...........####\n"
    "####...........####\n"
    "####...........####\n"
    "####...........####\n"
    "####...........####\n"
    "#h.r...........b.a#\n"
    "#hh#...........#aw#\n"
    "###################\n";

/// Same topology with a 5x7 hall.
inline const char* kSmallMap =
    "#############\n"
    "#hh#.....#ww#\n"
    "#h.r.....b.a#\n"
    "####.....####\n"
    "####.....####\n"
    "####.....####\n"
    "#h.r.....b.a#\n"
    "#hh#.....#aw#\n"
    "#############\n";

}  // namespace gridrl::deathmatch
