#pragma once

// Headless tile-based RPG: a hero walks a grid, talks to quest givers and
// collects quest items. Every step is logged in gtrace-1 as the four player
// actions move / pick-up-item / start-quest / complete-quest.
//
// STRIPS encoding of the log
//   dynamic: (at ?hero ?tile) (item-at ?item ?tile) (quest-ready ?q)
//            (quest-active ?q) (quest-done ?q) (has-count ?itemtype ?count)
//   static:  (neighbours ?tile ?tile) (npc-at ?npc ?tile) (npc-near ?npc ?tile)
//            (item-type ?item ?itemtype) (item-spawn ?item ?tile)
//            (item-quest ?item ?q) (quest-giver ?q ?npc)
//            (quest-item-type ?q ?itemtype) (quest-needs ?q ?count)
//            (next ?count ?count) (geq ?count ?count)
// Counts are objects n0..nK with successor and >= facts. An item keeps its
// item-at atom until it is picked up; whether it is visible follows from the
// status of its quest.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gtp/error.hpp"
#include "gtp/pddl.hpp"
#include "gtp/pddl_io.hpp"
#include "gtp/trace.hpp"

namespace gtp::rpg {

inline constexpr std::string_view kMapFormat = "gmap-1";

struct Tile {
  int row = 0;
  int col = 0;
  auto operator<=>(const Tile&) const = default;
  bool operator==(const Tile&) const = default;
};

inline std::string tile_name(Tile t) { return "t" + std::to_string(t.row) + "-" + std::to_string(t.col); }

inline std::optional<Tile> parse_tile_name(std::string_view name) {
  if (name.size() < 4 || name.front() != 't') return std::nullopt;
  auto dash = name.find('-', 1);
  if (dash == std::string_view::npos) return std::nullopt;
  try {
    std::size_t used = 0;
    std::string r(name.substr(1, dash - 1));
    std::string c(name.substr(dash + 1));
    Tile t{std::stoi(r, &used), 0};
    if (used != r.size()) return std::nullopt;
    t.col = std::stoi(c, &used);
    if (used != c.size()) return std::nullopt;
    if (tile_name(t) != name) return std::nullopt;
    return t;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

enum class Direction { Up, Down, Left, Right };
inline constexpr std::array<Direction, 4> kDirections{Direction::Up, Direction::Down, Direction::Left, Direction::Right};

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Up: return "up";
    case Direction::Down: return "down";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "?";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  for (auto d : kDirections) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

inline Tile offset(Tile t, Direction d) {
  switch (d) {
    case Direction::Up: return {t.row - 1, t.col};
    case Direction::Down: return {t.row + 1, t.col};
    case Direction::Left: return {t.row, t.col - 1};
    case Direction::Right: return {t.row, t.col + 1};
  }
  return t;
}

inline std::optional<Direction> direction_between(Tile from, Tile to) {
  for (auto d : kDirections) {
    if (offset(from, d) == to) return d;
  }
  return std::nullopt;
}

struct NpcSpec {
  std::string id;
  Tile tile;
};

struct QuestSpec {
  std::string id;
  std::string giver;
  std::string item_type;
  int count = 1;
};

struct ItemSpec {
  std::string id;
  std::string type;
  std::string quest;
  Tile tile;
};

struct Override {
  Tile from;
  Tile to;
  std::string kind;  // "one-way" keeps from->to only; "block" removes both directions
};

/// Validated map. Quest/NPC/item vectors keep file order; indices into them
/// are used throughout the simulator.
class GameMap {
 public:
  int rows = 0;
  int cols = 0;
  std::vector<std::string> grid;
  std::vector<bool> walkable;
  std::string hero_id = "hero";
  Tile hero_start;
  std::vector<NpcSpec> npcs;
  std::vector<QuestSpec> quests;
  std::vector<ItemSpec> items;
  std::vector<Override> overrides;

  bool in_bounds(Tile t) const { return t.row >= 0 && t.row < rows && t.col >= 0 && t.col < cols; }
  bool is_walkable(Tile t) const { return in_bounds(t) && walkable[index(t)]; }
  std::size_t index(Tile t) const { return static_cast<std::size_t>(t.row * cols + t.col); }

  bool adjacent(Tile from, Tile to) const { return adjacency_.contains({from, to}); }
  const std::set<std::pair<Tile, Tile>>& adjacency() const { return adjacency_; }

  std::vector<Tile> walkable_tiles() const {
    std::vector<Tile> out;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (walkable[index({r, c})]) out.push_back({r, c});
      }
    }
    return out;
  }

  /// Same tile or 4-adjacent.
  static bool near(Tile a, Tile b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) <= 1; }

  std::size_t npc_index(std::string_view id) const { return find(npcs, id); }
  std::size_t quest_index(std::string_view id) const { return find(quests, id); }
  std::size_t item_index(std::string_view id) const { return find(items, id); }

  std::vector<std::string> item_types() const {
    std::set<std::string> types;
    for (const auto& i : items) types.insert(i.type);
    for (const auto& q : quests) types.insert(q.item_type);
    return {types.begin(), types.end()};
  }

  /// Largest representable inventory count.
  int max_count() const {
    std::map<std::string, int> per_type;
    for (const auto& i : items) ++per_type[i.type];
    int k = 0;
    for (const auto& [t, n] : per_type) k = std::max(k, n);
    for (const auto& q : quests) k = std::max(k, q.count);
    return k;
  }

  void build_adjacency() {
    adjacency_.clear();
    for (const auto& t : walkable_tiles()) {
      for (auto d : kDirections) {
        Tile n = offset(t, d);
        if (is_walkable(n)) adjacency_.insert({t, n});
      }
    }
    for (const auto& o : overrides) {
      if (o.kind == "one-way") {
        adjacency_.insert({o.from, o.to});
        adjacency_.erase({o.to, o.from});
      } else {
        adjacency_.erase({o.from, o.to});
        adjacency_.erase({o.to, o.from});
      }
    }
  }

 private:
  template <typename T>
  static std::size_t find(const std::vector<T>& v, std::string_view id) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].id == id) return i;
    }
    return v.size();
  }

  std::set<std::pair<Tile, Tile>> adjacency_;
};

namespace detail {

inline bool is_lower_identifier(std::string_view s) {
  if (!sexpr::is_identifier(s)) return false;
  return std::none_of(s.begin(), s.end(), [](char c) { return std::isupper(static_cast<unsigned char>(c)); });
}

inline Tile tile_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw MapError(path, "expected [row, col]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

inline std::string id_from_json(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) throw MapError(path + "." + key, "expected a string");
  std::string id = it->get<std::string>();
  if (!is_lower_identifier(id)) throw MapError(path + "." + key, "'" + id + "' is not a lower-case identifier");
  return id;
}

inline const nlohmann::json& array_field(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::array();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_array()) throw MapError(key, "expected an array");
  return *it;
}

}  // namespace detail

inline GameMap load_map(const nlohmann::json& j) {
  if (!j.is_object()) throw MapError("$", "expected a JSON object");
  if (!j.contains("format") || j["format"] != kMapFormat) throw MapError("format", "expected \"gmap-1\"");
  GameMap m;

  std::map<char, bool> legend{{'#', false}, {'.', true}};
  if (auto it = j.find("legend"); it != j.end()) {
    if (!it->is_object()) throw MapError("legend", "expected an object");
    legend.clear();
    for (const auto& [key, value] : it->items()) {
      if (key.size() != 1) throw MapError("legend." + key, "legend keys must be single characters");
      if (value != "wall" && value != "floor") throw MapError("legend." + key, "expected \"wall\" or \"floor\"");
      legend[key[0]] = value == "floor";
    }
  }

  const auto& grid = detail::array_field(j, "grid");
  if (grid.empty()) throw MapError("grid", "expected at least one row");
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (!grid[r].is_string()) throw MapError("grid[" + std::to_string(r) + "]", "expected a string");
    m.grid.push_back(grid[r].get<std::string>());
  }
  m.rows = static_cast<int>(m.grid.size());
  m.cols = static_cast<int>(m.grid.front().size());
  if (m.cols == 0) throw MapError("grid[0]", "empty row");
  for (int r = 0; r < m.rows; ++r) {
    const std::string path = "grid[" + std::to_string(r) + "]";
    if (static_cast<int>(m.grid[r].size()) != m.cols) throw MapError(path, "rows must have equal length");
    for (char c : m.grid[r]) {
      auto it = legend.find(c);
      if (it == legend.end()) throw MapError(path, std::string("character '") + c + "' is not in the legend");
      m.walkable.push_back(it->second);
    }
  }

  std::set<std::string> ids;
  auto claim = [&](const std::string& id, const std::string& path) {
    if (!ids.insert(id).second) throw MapError(path, "duplicate id '" + id + "'");
  };

  const auto hero = j.find("hero");
  if (hero == j.end() || !hero->is_object()) throw MapError("hero", "expected an object");
  if (hero->contains("id")) m.hero_id = detail::id_from_json(*hero, "id", "hero");
  claim(m.hero_id, "hero.id");
  if (!hero->contains("start")) throw MapError("hero.start", "missing");
  m.hero_start = detail::tile_from_json((*hero)["start"], "hero.start");
  if (!m.is_walkable(m.hero_start)) throw MapError("hero.start", "start tile is not walkable");

  const auto& npcs = detail::array_field(j, "npcs");
  for (std::size_t i = 0; i < npcs.size(); ++i) {
    const std::string path = "npcs[" + std::to_string(i) + "]";
    NpcSpec n{detail::id_from_json(npcs[i], "id", path), detail::tile_from_json(npcs[i].value("tile", nlohmann::json()), path + ".tile")};
    if (!m.in_bounds(n.tile)) throw MapError(path + ".tile", "outside the grid");
    claim(n.id, path + ".id");
    m.npcs.push_back(std::move(n));
  }

  const auto& quests = detail::array_field(j, "quests");
  for (std::size_t i = 0; i < quests.size(); ++i) {
    const std::string path = "quests[" + std::to_string(i) + "]";
    QuestSpec q;
    q.id = detail::id_from_json(quests[i], "id", path);
    q.giver = detail::id_from_json(quests[i], "giver", path);
    q.item_type = detail::id_from_json(quests[i], "item_type", path);
    if (!quests[i].contains("count") || !quests[i]["count"].is_number_integer()) throw MapError(path + ".count", "expected an integer");
    q.count = quests[i]["count"].get<int>();
    if (q.count < 1) throw MapError(path + ".count", "must be at least 1");
    if (m.npc_index(q.giver) == m.npcs.size()) throw MapError(path + ".giver", "unknown NPC '" + q.giver + "'");
    claim(q.id, path + ".id");
    m.quests.push_back(std::move(q));
  }

  const auto& items = detail::array_field(j, "items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string path = "items[" + std::to_string(i) + "]";
    ItemSpec it;
    it.id = detail::id_from_json(items[i], "id", path);
    it.type = detail::id_from_json(items[i], "type", path);
    it.quest = detail::id_from_json(items[i], "quest", path);
    it.tile = detail::tile_from_json(items[i].value("tile", nlohmann::json()), path + ".tile");
    std::size_t q = m.quest_index(it.quest);
    if (q == m.quests.size()) throw MapError(path + ".quest", "unknown quest '" + it.quest + "'");
    if (m.quests[q].item_type != it.type) {
      throw MapError(path + ".type", "quest " + it.quest + " collects " + m.quests[q].item_type + ", not " + it.type);
    }
    if (!m.is_walkable(it.tile)) throw MapError(path + ".tile", "item spawn tile is not walkable");
    claim(it.id, path + ".id");
    m.items.push_back(std::move(it));
  }

  for (std::size_t qi = 0; qi < m.quests.size(); ++qi) {
    const auto& q = m.quests[qi];
    auto n = std::count_if(m.items.begin(), m.items.end(), [&](const ItemSpec& i) { return i.quest == q.id; });
    if (n < q.count) {
      throw MapError("quests[" + std::to_string(qi) + "].count",
                     "quest " + q.id + " needs " + std::to_string(q.count) + " items but only " + std::to_string(n) + " spawn");
    }
  }
  for (const auto& t : m.item_types()) claim(t, "item type " + t);

  const auto& overrides = detail::array_field(j, "overrides");
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const std::string path = "overrides[" + std::to_string(i) + "]";
    Override o;
    o.from = detail::tile_from_json(overrides[i].value("from", nlohmann::json()), path + ".from");
    o.to = detail::tile_from_json(overrides[i].value("to", nlohmann::json()), path + ".to");
    o.kind = overrides[i].value("kind", std::string("one-way"));
    if (o.kind != "one-way" && o.kind != "block") throw MapError(path + ".kind", "expected \"one-way\" or \"block\"");
    if (!m.is_walkable(o.from) || !m.is_walkable(o.to)) throw MapError(path, "override endpoints must be walkable");
    if (!direction_between(o.from, o.to)) throw MapError(path, "override endpoints must be 4-adjacent");
    m.overrides.push_back(o);
  }
  m.build_adjacency();
  return m;
}

inline GameMap load_map_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MapError("$", std::string("invalid JSON: ") + e.what());
  }
  return load_map(j);
}

inline GameMap load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_map_text(ss.str());
}

enum class ItemStatus { Unspawned, OnTile, Gone };
enum class QuestStatus { Ready, Active, Done };

inline std::string_view to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::Unspawned: return "unspawned";
    case ItemStatus::OnTile: return "on-tile";
    case ItemStatus::Gone: return "gone";
  }
  return "?";
}

inline std::string_view to_string(QuestStatus s) {
  switch (s) {
    case QuestStatus::Ready: return "ready";
    case QuestStatus::Active: return "active";
    case QuestStatus::Done: return "done";
  }
  return "?";
}

struct GameState {
  Tile hero;
  std::vector<ItemStatus> items;
  std::vector<QuestStatus> quests;
  std::map<std::string, int> inventory;
  auto operator<=>(const GameState&) const = default;
  bool operator==(const GameState&) const = default;
};

inline GameState initial_state(const GameMap& m) {
  GameState s;
  s.hero = m.hero_start;
  s.items.assign(m.items.size(), ItemStatus::Unspawned);
  s.quests.assign(m.quests.size(), QuestStatus::Ready);
  for (const auto& t : m.item_types()) s.inventory[t] = 0;
  return s;
}

struct GameEvent {
  enum class Kind { Move, PickUp, StartQuest, CompleteQuest };
  Kind kind = Kind::Move;
  Tile from;
  Tile to;
  std::size_t item = 0;
  std::size_t quest = 0;
  int new_count = 0;
  bool operator==(const GameEvent&) const = default;
};

inline std::string_view action_name(GameEvent::Kind k) {
  switch (k) {
    case GameEvent::Kind::Move: return "move";
    case GameEvent::Kind::PickUp: return "pick-up-item";
    case GameEvent::Kind::StartQuest: return "start-quest";
    case GameEvent::Kind::CompleteQuest: return "complete-quest";
  }
  return "?";
}

/// An event together with the state right after it.
struct Transition {
  GameEvent event;
  GameState after;
};

/// Applies one arrow-key command. Auto-events follow the move in the order
/// PickUp*, StartQuest*, CompleteQuest*, each applied before the next rule.
inline std::vector<Transition> step_transitions(const GameMap& m, const GameState& gs, Direction dir) {
  std::vector<Transition> out;
  Tile target = offset(gs.hero, dir);
  if (!m.adjacent(gs.hero, target)) return out;
  GameState s = gs;
  s.hero = target;
  out.push_back({{GameEvent::Kind::Move, gs.hero, target}, s});

  for (std::size_t i = 0; i < m.items.size(); ++i) {
    const ItemSpec& item = m.items[i];
    std::size_t q = m.quest_index(item.quest);
    if (s.items[i] == ItemStatus::OnTile && item.tile == s.hero && s.quests[q] == QuestStatus::Active) {
      s.items[i] = ItemStatus::Gone;
      int c = ++s.inventory[item.type];
      GameEvent e{GameEvent::Kind::PickUp, s.hero, s.hero};
      e.item = i;
      e.quest = q;
      e.new_count = c;
      out.push_back({e, s});
    }
  }
  for (std::size_t q = 0; q < m.quests.size(); ++q) {
    const NpcSpec& giver = m.npcs[m.npc_index(m.quests[q].giver)];
    if (s.quests[q] == QuestStatus::Ready && GameMap::near(giver.tile, s.hero)) {
      s.quests[q] = QuestStatus::Active;
      for (std::size_t i = 0; i < m.items.size(); ++i) {
        if (m.items[i].quest == m.quests[q].id && s.items[i] == ItemStatus::Unspawned) s.items[i] = ItemStatus::OnTile;
      }
      GameEvent e{GameEvent::Kind::StartQuest, s.hero, s.hero};
      e.quest = q;
      out.push_back({e, s});
    }
  }
  for (std::size_t q = 0; q < m.quests.size(); ++q) {
    const QuestSpec& spec = m.quests[q];
    const NpcSpec& giver = m.npcs[m.npc_index(spec.giver)];
    if (s.quests[q] == QuestStatus::Active && GameMap::near(giver.tile, s.hero) && s.inventory[spec.item_type] >= spec.count) {
      s.quests[q] = QuestStatus::Done;
      GameEvent e{GameEvent::Kind::CompleteQuest, s.hero, s.hero};
      e.quest = q;
      e.new_count = s.inventory[spec.item_type];
      out.push_back({e, s});
    }
  }
  return out;
}

inline std::pair<GameState, std::vector<GameEvent>> step(const GameMap& m, const GameState& gs, Direction dir) {
  auto ts = step_transitions(m, gs, dir);
  std::vector<GameEvent> events;
  for (const auto& t : ts) events.push_back(t.event);
  return {ts.empty() ? gs : ts.back().after, std::move(events)};
}

// ---------------------------------------------------------------------------
// STRIPS view of the game

inline std::string count_name(int n) { return "n" + std::to_string(n); }

inline std::map<std::string, std::string> objects(const GameMap& m) {
  std::map<std::string, std::string> out;
  out[m.hero_id] = "hero";
  for (const auto& t : m.walkable_tiles()) out[tile_name(t)] = "tile";
  for (const auto& n : m.npcs) out[n.id] = "npc";
  for (const auto& q : m.quests) out[q.id] = "quest";
  for (const auto& i : m.items) out[i.id] = "item";
  for (const auto& t : m.item_types()) out[t] = "itemtype";
  for (int c = 0; c <= m.max_count(); ++c) out[count_name(c)] = "count";
  return out;
}

inline AtomSet static_facts(const GameMap& m) {
  AtomSet s;
  for (const auto& [from, to] : m.adjacency()) s.insert({"neighbours", {tile_name(from), tile_name(to)}});
  const auto tiles = m.walkable_tiles();
  for (const auto& n : m.npcs) {
    if (m.is_walkable(n.tile)) s.insert({"npc-at", {n.id, tile_name(n.tile)}});
    for (const auto& t : tiles) {
      if (GameMap::near(n.tile, t)) s.insert({"npc-near", {n.id, tile_name(t)}});
    }
  }
  for (const auto& i : m.items) {
    s.insert({"item-type", {i.id, i.type}});
    s.insert({"item-spawn", {i.id, tile_name(i.tile)}});
    s.insert({"item-quest", {i.id, i.quest}});
  }
  for (const auto& q : m.quests) {
    s.insert({"quest-giver", {q.id, q.giver}});
    s.insert({"quest-item-type", {q.id, q.item_type}});
    s.insert({"quest-needs", {q.id, count_name(q.count)}});
  }
  const int k = m.max_count();
  for (int c = 0; c < k; ++c) s.insert({"next", {count_name(c), count_name(c + 1)}});
  for (int a = 0; a <= k; ++a) {
    for (int b = 0; b <= a; ++b) s.insert({"geq", {count_name(a), count_name(b)}});
  }
  return s;
}

inline State dynamic_atoms(const GameMap& m, const GameState& gs) {
  State s;
  s.insert({"at", {m.hero_id, tile_name(gs.hero)}});
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    if (gs.items[i] != ItemStatus::Gone) s.insert({"item-at", {m.items[i].id, tile_name(m.items[i].tile)}});
  }
  for (std::size_t q = 0; q < m.quests.size(); ++q) {
    static constexpr std::array<const char*, 3> kPred{"quest-ready", "quest-active", "quest-done"};
    s.insert({kPred[static_cast<std::size_t>(gs.quests[q])], {m.quests[q].id}});
  }
  for (const auto& [type, n] : gs.inventory) s.insert({"has-count", {type, count_name(n)}});
  return s;
}

/// Trace action for `e`, given the state right before it.
inline ActionRef to_action(const GameMap& m, const GameState& before, const GameEvent& e) {
  using K = GameEvent::Kind;
  switch (e.kind) {
    case K::Move:
      return {"move", {m.hero_id, tile_name(e.from), tile_name(e.to)}};
    case K::PickUp: {
      const ItemSpec& item = m.items[e.item];
      return {"pick-up-item",
              {m.hero_id, item.id, tile_name(item.tile), item.quest, item.type, count_name(before.inventory.at(item.type)),
               count_name(e.new_count)}};
    }
    case K::StartQuest: {
      const QuestSpec& q = m.quests[e.quest];
      return {"start-quest", {m.hero_id, q.id, q.giver, tile_name(before.hero)}};
    }
    case K::CompleteQuest: {
      const QuestSpec& q = m.quests[e.quest];
      return {"complete-quest",
              {m.hero_id, q.id, q.giver, tile_name(before.hero), q.item_type, count_name(before.inventory.at(q.item_type)),
               count_name(q.count)}};
    }
  }
  return {};
}

inline TraceHeader trace_header(const GameMap& m) {
  TraceHeader h;
  h.objects = objects(m);
  h.statics = static_facts(m);
  h.init = dynamic_atoms(m, initial_state(m));
  return h;
}

inline AtomSet all_quests_done(const GameMap& m) {
  AtomSet goal;
  for (const auto& q : m.quests) goal.insert({"quest-done", {q.id}});
  return goal;
}

/// Planning problem for the map's initial state (static ∪ dynamic facts).
inline Problem to_problem(const GameMap& m, AtomSet goal, std::string name = "rpg-demo", std::string domain = "rpg") {
  Problem p;
  p.name = std::move(name);
  p.domain_name = std::move(domain);
  p.objects = objects(m);
  p.init = static_facts(m);
  for (const auto& a : dynamic_atoms(m, initial_state(m))) p.init.insert(a);
  p.goal = std::move(goal);
  return p;
}

/// Simulator instance that logs every step.
class Session {
 public:
  explicit Session(GameMap m) : map_(std::move(m)) { reset(); }

  void reset() {
    state_ = initial_state(map_);
    trace_ = Trace{};
    trace_.header = trace_header(map_);
    last_.clear();
  }

  const std::vector<GameEvent>& command(Direction d) {
    last_.clear();
    GameState before = state_;
    State prev_atoms = dynamic_atoms(map_, before);
    for (auto& t : step_transitions(map_, state_, d)) {
      TraceStep step;
      step.index = trace_.steps.size();
      step.action = to_action(map_, before, t.event);
      State next_atoms = dynamic_atoms(map_, t.after);
      step.delta = Delta{set_minus(next_atoms, prev_atoms), set_minus(prev_atoms, next_atoms)};
      trace_.steps.push_back(std::move(step));
      last_.push_back(t.event);
      prev_atoms = std::move(next_atoms);
      before = t.after;
      state_ = std::move(t.after);
    }
    return last_;
  }

  const GameMap& map() const { return map_; }
  const GameState& state() const { return state_; }
  const Trace& trace() const { return trace_; }
  const std::vector<GameEvent>& last_events() const { return last_; }

 private:
  GameMap map_;
  GameState state_;
  Trace trace_;
  std::vector<GameEvent> last_;
};

inline Trace record_session(const GameMap& m, const std::vector<Direction>& commands) {
  Session s(m);
  for (auto d : commands) s.command(d);
  return s.trace();
}

/// Shortest command sequence (directed adjacency) from `from` to any tile in
/// `targets`; nullopt if none is reachable.
inline std::optional<std::vector<Direction>> route(const GameMap& m, Tile from, const std::set<Tile>& targets) {
  if (targets.contains(from)) return std::vector<Direction>{};
  std::map<Tile, std::pair<Tile, Direction>> parent;
  std::deque<Tile> open{from};
  std::set<Tile> seen{from};
  while (!open.empty()) {
    Tile t = open.front();
    open.pop_front();
    for (auto d : kDirections) {
      Tile n = offset(t, d);
      if (!m.adjacent(t, n) || !seen.insert(n).second) continue;
      parent[n] = {t, d};
      if (targets.contains(n)) {
        std::vector<Direction> path;
        for (Tile c = n; c != from; c = parent[c].first) path.push_back(parent[c].second);
        return std::vector<Direction>(path.rbegin(), path.rend());
      }
      open.push_back(n);
    }
  }
  return std::nullopt;
}

struct CoveragePolicy {};
struct RandomPolicy {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
};

namespace detail {

/// Drives the session until `done()` holds, entering `targets` by a move.
template <typename Done>
void reach(Session& s, const std::set<Tile>& targets, Done done, const std::string& what) {
  for (int attempt = 0; attempt < 4 && !done(); ++attempt) {
    if (targets.contains(s.state().hero)) {
      // An event needs a move into the target area; step out first.
      bool moved = false;
      for (auto d : kDirections) {
        Tile n = offset(s.state().hero, d);
        if (s.map().adjacent(s.state().hero, n) && route(s.map(), n, targets)) {
          s.command(d);
          moved = true;
          break;
        }
      }
      if (!moved) throw CoverageImpossible("cannot re-enter target area for " + what);
      continue;
    }
    auto path = route(s.map(), s.state().hero, targets);
    if (!path) throw CoverageImpossible(what + " is unreachable from " + tile_name(s.state().hero));
    for (auto d : *path) {
      s.command(d);
      if (done()) return;
    }
  }
  if (!done()) throw CoverageImpossible("could not complete " + what);
}

}  // namespace detail

/// Walks every one-way edge, then starts, fulfils and completes each quest in order.
inline Trace scripted_playthrough(const GameMap& m, CoveragePolicy) {
  Session s(m);
  for (const auto& o : m.overrides) {
    if (o.kind != "one-way") continue;
    auto path = route(m, s.state().hero, {o.from});
    if (!path) throw CoverageImpossible("one-way edge start " + tile_name(o.from) + " is unreachable");
    for (auto d : *path) s.command(d);
    s.command(*direction_between(o.from, o.to));
  }
  for (std::size_t q = 0; q < m.quests.size(); ++q) {
    const QuestSpec& spec = m.quests[q];
    const Tile giver = m.npcs[m.npc_index(spec.giver)].tile;
    std::set<Tile> near_giver;
    for (const auto& t : m.walkable_tiles()) {
      if (GameMap::near(giver, t)) near_giver.insert(t);
    }
    detail::reach(s, near_giver, [&] { return s.state().quests[q] != QuestStatus::Ready; }, "start of " + spec.id);
    while (s.state().quests[q] == QuestStatus::Active && s.state().inventory.at(spec.item_type) < spec.count) {
      std::set<Tile> item_tiles;
      for (std::size_t i = 0; i < m.items.size(); ++i) {
        if (m.items[i].quest == spec.id && s.state().items[i] == ItemStatus::OnTile) item_tiles.insert(m.items[i].tile);
      }
      if (item_tiles.empty()) throw CoverageImpossible("not enough items left for " + spec.id);
      const int before = s.state().inventory.at(spec.item_type);
      detail::reach(s, item_tiles, [&] { return s.state().inventory.at(spec.item_type) > before; }, "items of " + spec.id);
    }
    detail::reach(s, near_giver, [&] { return s.state().quests[q] == QuestStatus::Done; }, "completion of " + spec.id);
  }
  return s.trace();
}

/// `steps` uniformly random arrow-key presses; blocked presses log nothing.
inline Trace scripted_playthrough(const GameMap& m, RandomPolicy policy) {
  std::mt19937_64 rng(policy.seed);
  std::uniform_int_distribution<int> pick(0, 3);
  Session s(m);
  for (std::size_t k = 0; k < policy.steps; ++k) s.command(kDirections[static_cast<std::size_t>(pick(rng))]);
  return s.trace();
}

// ---------------------------------------------------------------------------
// Test script execution

struct ExecutionReport {
  bool success = false;
  std::optional<std::size_t> divergence_step;
  std::string expected;
  std::string observed;
  /// Auto-events the plan did not list (they do not fail the run).
  std::vector<std::string> unplanned_events;
  GameState final_state;
  std::size_t commands = 0;
};

inline nlohmann::json to_json(const GameMap& m, const GameState& s) {
  nlohmann::json j;
  j["hero"] = {s.hero.row, s.hero.col};
  j["quests"] = nlohmann::json::array();
  for (std::size_t q = 0; q < m.quests.size(); ++q) {
    j["quests"].push_back({{"id", m.quests[q].id}, {"status", std::string(to_string(s.quests[q]))}});
  }
  j["items"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    j["items"].push_back({{"id", m.items[i].id},
                          {"type", m.items[i].type},
                          {"tile", {m.items[i].tile.row, m.items[i].tile.col}},
                          {"status", std::string(to_string(s.items[i]))}});
  }
  j["inventory"] = s.inventory;
  return j;
}

inline nlohmann::json to_json(const GameMap& m, const ExecutionReport& r) {
  nlohmann::json j;
  j["result"] = r.success ? "SUCCESS" : "DIVERGED";
  if (r.divergence_step) {
    j["divergence"] = {{"step", *r.divergence_step}, {"expected", r.expected}, {"observed", r.observed}};
  }
  j["unplanned_events"] = r.unplanned_events;
  j["commands"] = r.commands;
  j["final_state"] = to_json(m, r.final_state);
  return j;
}

namespace detail {

/// The object identifying a non-move step: the item for pick-ups, else the quest.
inline std::string event_key(const ActionRef& a) { return a.args.size() > 1 ? a.args[1] : std::string(); }

}  // namespace detail

/// Executes the plan's moves as arrow-key commands. Every non-move step must
/// be observed as an auto-event, in plan order.
inline ExecutionReport execute_plan(const GameMap& m, const Plan& plan) {
  static const std::map<std::string, std::size_t, std::less<>> kArity{
      {"move", 3}, {"pick-up-item", 7}, {"start-quest", 4}, {"complete-quest", 7}};
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const ActionRef& a = plan[i];
    auto it = kArity.find(a.name);
    if (it == kArity.end()) throw MalformedPlan("step " + std::to_string(i) + ": unknown action '" + a.name + "'");
    if (a.args.size() != it->second) throw MalformedPlan("step " + std::to_string(i) + ": wrong argument count in " + to_string(a));
    if (a.name == "move") {
      auto from = parse_tile_name(a.args[1]);
      auto to = parse_tile_name(a.args[2]);
      if (!from || !to || !m.in_bounds(*from) || !m.in_bounds(*to)) {
        throw MalformedPlan("step " + std::to_string(i) + ": unknown tile in " + to_string(a));
      }
      if (!direction_between(*from, *to)) throw MalformedPlan("step " + std::to_string(i) + ": non-adjacent move " + to_string(a));
    }
  }

  ExecutionReport r;
  Session s(m);
  struct Observed {
    ActionRef action;
    bool matched = false;
  };
  std::vector<Observed> pending;
  std::size_t cursor = 0;
  auto diverge = [&](std::size_t i, std::string expected, std::string observed) {
    r.divergence_step = i;
    r.expected = std::move(expected);
    r.observed = std::move(observed);
  };

  for (std::size_t i = 0; i < plan.size() && !r.divergence_step; ++i) {
    const ActionRef& a = plan[i];
    if (a.name == "move") {
      const Tile from = *parse_tile_name(a.args[1]);
      const Tile to = *parse_tile_name(a.args[2]);
      if (s.state().hero != from) {
        diverge(i, to_string(a), "hero at " + tile_name(s.state().hero));
        break;
      }
      const auto& events = s.command(*direction_between(from, to));
      ++r.commands;
      if (events.empty() || events.front().kind != GameEvent::Kind::Move) {
        diverge(i, to_string(a), "move blocked, hero stays at " + tile_name(from));
        break;
      }
      for (std::size_t e = 1; e < events.size(); ++e) {
        const auto& step = s.trace().steps[s.trace().steps.size() - events.size() + e];
        pending.push_back({step.action});
      }
      continue;
    }
    // Each pick-up/start/complete happens at most once per game, so the key
    // identifies the event even when the simulator fired it before the plan
    // asked for it.
    std::size_t k = 0;
    while (k < pending.size() && (pending[k].matched || pending[k].action.name != a.name ||
                                  detail::event_key(pending[k].action) != detail::event_key(a))) {
      ++k;
    }
    if (k == pending.size()) {
      std::string seen = "no matching event";
      if (cursor < pending.size()) seen = "next observed event " + to_string(pending[cursor].action);
      diverge(i, to_string(a), seen);
      break;
    }
    pending[k].matched = true;
    cursor = std::max(cursor, k + 1);
  }
  for (const auto& p : pending) {
    if (!p.matched) r.unplanned_events.push_back(to_string(p.action));
  }
  r.success = !r.divergence_step.has_value();
  r.final_state = s.state();
  return r;
}

}  // namespace gtp::rpg
