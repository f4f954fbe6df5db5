#pragma once

// Shared fixtures and independent oracles. Nothing here reuses the library's
// grounder or search code.

#include <bit>
#include <climits>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gtp/gtp.hpp"

namespace gtp {
inline void PrintTo(const Atom& a, std::ostream* os) { *os << to_string(a); }
inline void PrintTo(const ActionRef& a, std::ostream* os) { *os << to_string(a); }
}  // namespace gtp

namespace testing_support {

using namespace gtp;

inline std::string data_path(const std::string& rel) { return std::string(GTP_DATA_DIR) + "/" + rel; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Domain reference_domain() { return parse_domain(slurp(data_path("rpg-reference-domain.pddl"))); }
inline rpg::GameMap load(const std::string& name) { return rpg::load_map_file(data_path("maps/" + name)); }

// --- naive STRIPS oracle ----------------------------------------------------

/// Every type-correct instantiation of every schema, no pruning.
inline std::vector<GroundAction> enumerate_all(const Domain& d, const Problem& p) {
  std::vector<GroundAction> out;
  for (const auto& [name, schema] : d.actions) {
    std::vector<std::vector<std::string>> choices;
    for (const auto& param : schema.params) {
      std::vector<std::string> objs;
      for (const auto& [o, t] : p.objects) {
        if (param.type == "object" || param.type == t) objs.push_back(o);
      }
      choices.push_back(objs);
    }
    std::vector<std::size_t> idx(choices.size(), 0);
    bool empty = false;
    for (const auto& c : choices) empty = empty || c.empty();
    if (empty) continue;
    for (;;) {
      std::vector<std::string> args;
      for (std::size_t i = 0; i < idx.size(); ++i) args.push_back(choices[i][idx[i]]);
      out.push_back(instantiate(schema, args));
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == choices[k].size()) idx[k++] = 0;
      if (k == idx.size()) break;
    }
  }
  return out;
}

/// Naive enumeration restricted to actions whose preconditions are reachable
/// under delete relaxation.
inline std::set<ActionRef> relaxed_reachable_actions(const Domain& d, const Problem& p) {
  auto all = enumerate_all(d, p);
  std::set<Atom> reached(p.init.begin(), p.init.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& a : all) {
      if (!std::includes(reached.begin(), reached.end(), a.pre.begin(), a.pre.end())) continue;
      for (const auto& x : a.add) changed = reached.insert(x).second || changed;
    }
  }
  std::set<ActionRef> out;
  for (const auto& a : all) {
    if (std::includes(reached.begin(), reached.end(), a.pre.begin(), a.pre.end())) out.insert(a.ref());
  }
  return out;
}

/// Breadth-first search over explicit atom sets with the unpruned action set.
/// Returns the optimal plan length, or nullopt if the goal is unreachable.
inline std::optional<std::size_t> naive_bfs(const Domain& d, const Problem& p, std::size_t max_states = 2'000'000) {
  auto actions = enumerate_all(d, p);
  auto goal_ok = [&](const std::set<Atom>& s) { return std::includes(s.begin(), s.end(), p.goal.begin(), p.goal.end()); };
  std::set<Atom> init(p.init.begin(), p.init.end());
  if (goal_ok(init)) return 0;
  std::set<std::set<Atom>> seen{init};
  std::deque<std::pair<std::set<Atom>, std::size_t>> open{{init, 0}};
  while (!open.empty()) {
    auto [s, g] = open.front();
    open.pop_front();
    for (const auto& a : actions) {
      if (!std::includes(s.begin(), s.end(), a.pre.begin(), a.pre.end())) continue;
      std::set<Atom> n;
      for (const auto& x : s) {
        if (!a.del.contains(x)) n.insert(x);
      }
      n.insert(a.add.begin(), a.add.end());
      if (!seen.insert(n).second) continue;
      if (goal_ok(n)) return g + 1;
      if (seen.size() > max_states) throw std::runtime_error("naive_bfs: state limit");
      open.emplace_back(std::move(n), g + 1);
    }
  }
  return std::nullopt;
}

// --- grid oracle --------------------------------------------------------------

/// Directed walkable adjacency read straight from the map JSON.
struct Grid {
  std::vector<std::string> rows;
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> edges;

  explicit Grid(const nlohmann::json& j) {
    rows = j.at("grid").get<std::vector<std::string>>();
    auto open = [&](int r, int c) {
      return r >= 0 && r < static_cast<int>(rows.size()) && c >= 0 && c < static_cast<int>(rows[r].size()) && rows[r][c] != '#';
    };
    for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
      for (int c = 0; c < static_cast<int>(rows[r].size()); ++c) {
        if (!open(r, c)) continue;
        const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          if (open(r + dr[k], c + dc[k])) edges.insert({{r, c}, {r + dr[k], c + dc[k]}});
        }
      }
    }
    for (const auto& o : j.value("overrides", nlohmann::json::array())) {
      std::pair<int, int> from{o["from"][0], o["from"][1]}, to{o["to"][0], o["to"][1]};
      if (o["kind"] == "one-way") edges.erase({to, from});
    }
  }

  std::set<std::pair<int, int>> reachable_from(std::pair<int, int> s) const {
    std::set<std::pair<int, int>> seen{s};
    std::deque<std::pair<int, int>> q{s};
    while (!q.empty()) {
      auto t = q.front();
      q.pop_front();
      for (auto it = edges.lower_bound({t, {INT32_MIN, INT32_MIN}}); it != edges.end() && it->first == t; ++it) {
        if (seen.insert(it->second).second) q.push_back(it->second);
      }
    }
    return seen;
  }

  std::set<std::pair<int, int>> walkable() const {
    std::set<std::pair<int, int>> out;
    for (const auto& [a, b] : edges) {
      out.insert(a);
      out.insert(b);
    }
    return out;
  }
};

/// Shortest action count to finish one quest, computed by BFS over
/// (tile, quest started, items picked) with the game's auto-event rules.
/// Every finishing run takes exactly 2 + n non-move actions.
inline std::size_t quest_optimal_cost(const nlohmann::json& map, const std::string& quest) {
  Grid g(map);
  std::pair<int, int> start{map["hero"]["start"][0], map["hero"]["start"][1]};
  std::string giver;
  for (const auto& q : map["quests"]) {
    if (q["id"] == quest) giver = q["giver"];
  }
  std::pair<int, int> npc;
  for (const auto& n : map["npcs"]) {
    if (n["id"] == giver) npc = {n["tile"][0], n["tile"][1]};
  }
  std::vector<std::pair<int, int>> items;
  std::size_t need = 0;
  for (const auto& q : map["quests"]) {
    if (q["id"] == quest) need = q["count"];
  }
  for (const auto& i : map["items"]) {
    if (i["quest"] == quest) items.push_back({i["tile"][0], i["tile"][1]});
  }
  auto near = [&](std::pair<int, int> t) { return std::abs(t.first - npc.first) + std::abs(t.second - npc.second) <= 1; };
  struct S {
    std::pair<int, int> tile;
    bool started;
    unsigned picked;
    auto operator<=>(const S&) const = default;
  };
  // Dijkstra: a move costs 1 plus one per auto-event it triggers.
  std::map<S, std::size_t> dist{{{start, false, 0}, 0}};
  std::priority_queue<std::pair<std::size_t, S>, std::vector<std::pair<std::size_t, S>>, std::greater<>> open;
  open.push({0, {start, false, 0}});
  while (!open.empty()) {
    auto [d, s] = open.top();
    open.pop();
    if (dist[s] < d) continue;
    for (auto it = g.edges.lower_bound({s.tile, {INT32_MIN, INT32_MIN}}); it != g.edges.end() && it->first == s.tile; ++it) {
      S n{it->second, s.started, s.picked};
      std::size_t cost = d + 1;
      if (n.started) {
        for (std::size_t k = 0; k < items.size(); ++k) {
          if (items[k] == n.tile && !(n.picked & (1u << k))) {
            n.picked |= 1u << k;
            ++cost;
          }
        }
      }
      if (!n.started && near(n.tile)) {
        n.started = true;
        ++cost;
      }
      if (n.started && static_cast<std::size_t>(std::popcount(n.picked)) >= need && near(n.tile)) {
        n.picked = ~0u;  // completed
        ++cost;
      }
      auto found = dist.find(n);
      if (found != dist.end() && found->second <= cost) continue;
      dist[n] = cost;
      open.push({cost, n});
    }
  }
  std::size_t best = SIZE_MAX;
  for (const auto& [s, d] : dist) {
    if (s.picked == ~0u) best = std::min(best, d);
  }
  if (best != SIZE_MAX) return best;
  throw std::runtime_error("quest unreachable");
}

// --- random instances ---------------------------------------------------------

inline std::string random_name(std::mt19937_64& rng, const char* prefix) {
  return std::string(prefix) + std::to_string(std::uniform_int_distribution<int>(0, 9999)(rng));
}

/// Random well-formed domain with 1..4 types, up to 6 predicates, up to 4 actions.
inline Domain random_domain(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Domain d;
  d.name = random_name(rng, "dom-");
  std::vector<std::string> types{"object"};
  for (int i = pick(0, 3); i > 0; --i) {
    auto t = random_name(rng, "type-");
    d.types.insert(t);
    types.push_back(t);
  }
  for (int i = pick(1, 6); i > 0; --i) {
    PredicateDecl pd;
    pd.name = random_name(rng, "pred-");
    for (int k = 0, n = pick(0, 3); k < n; ++k) pd.params.push_back({"?x" + std::to_string(k), types[pick(0, types.size() - 1)]});
    d.predicates[pd.name] = pd;
  }
  std::vector<PredicateDecl> preds;
  for (const auto& [n, p] : d.predicates) preds.push_back(p);
  for (int i = pick(0, 4); i > 0; --i) {
    ActionSchema a;
    a.name = random_name(rng, "act-");
    for (int k = 0, n = pick(0, 4); k < n; ++k) a.params.push_back({"?p" + std::to_string(k), types[pick(0, types.size() - 1)]});
    auto random_atom = [&]() -> std::optional<Atom> {
      const auto& pd = preds[pick(0, preds.size() - 1)];
      Atom at{pd.name, {}};
      for (const auto& param : pd.params) {
        std::vector<std::string> fits;
        for (const auto& ap : a.params) {
          if (param.type == "object" || ap.type == param.type) fits.push_back(ap.name);
        }
        if (fits.empty()) return std::nullopt;
        at.args.push_back(fits[pick(0, fits.size() - 1)]);
      }
      return at;
    };
    for (int k = pick(0, 4); k > 0; --k) {
      if (auto at = random_atom()) a.pre.insert(*at);
    }
    for (int k = pick(0, 3); k > 0; --k) {
      if (auto at = random_atom()) a.add.insert(*at);
    }
    for (int k = pick(0, 3); k > 0; --k) {
      if (auto at = random_atom(); at && !a.add.contains(*at)) a.del.insert(*at);
    }
    d.actions[a.name] = a;
  }
  return d;
}

inline Problem random_problem(std::mt19937_64& rng, const Domain& d) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Problem p;
  p.name = random_name(rng, "prob-");
  p.domain_name = d.name;
  std::vector<std::string> types{"object"};
  types.insert(types.end(), d.types.begin(), d.types.end());
  for (int i = pick(1, 8); i > 0; --i) p.objects[random_name(rng, "o")] = types[pick(0, types.size() - 1)];
  auto random_fact = [&]() -> std::optional<Atom> {
    auto it = d.predicates.begin();
    std::advance(it, pick(0, d.predicates.size() - 1));
    Atom at{it->first, {}};
    for (const auto& param : it->second.params) {
      std::vector<std::string> fits;
      for (const auto& [o, t] : p.objects) {
        if (param.type == "object" || t == param.type) fits.push_back(o);
      }
      if (fits.empty()) return std::nullopt;
      at.args.push_back(fits[pick(0, fits.size() - 1)]);
    }
    return at;
  };
  for (int i = pick(0, 10); i > 0; --i) {
    if (auto a = random_fact()) p.init.insert(*a);
  }
  for (int i = pick(0, 4); i > 0; --i) {
    if (auto a = random_fact()) p.goal.insert(*a);
  }
  return p;
}

/// Random trace over random objects; steps use delta form or full-state form.
inline Trace random_trace(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Trace t;
  std::vector<std::string> objs;
  for (int i = pick(1, 6); i > 0; --i) {
    auto o = random_name(rng, "obj-");
    t.header.objects[o] = pick(0, 1) ? "thing" : "place";
    objs.push_back(o);
  }
  std::vector<std::string> preds{"p", "q", "r"};
  auto atom = [&](const std::string& pred) {
    Atom a{pred, {}};
    for (int k = 0, n = pred == "p" ? 1 : 2; k < n; ++k) a.args.push_back(objs[pick(0, objs.size() - 1)]);
    return a;
  };
  for (int i = pick(0, 4); i > 0; --i) t.header.statics.insert(atom("s"));
  State s;
  for (int i = pick(0, 5); i > 0; --i) s.insert(atom(preds[pick(0, 2)]));
  t.header.init = s;
  for (int i = 0, n = pick(0, 12); i < n; ++i) {
    TraceStep st;
    st.index = i;
    st.action = {"act-" + std::to_string(pick(0, 2)), {}};
    for (int k = pick(0, 3); k > 0; --k) st.action.args.push_back(objs[pick(0, objs.size() - 1)]);
    State next = s;
    for (int k = pick(0, 2); k > 0 && !next.empty(); --k) {
      auto it = next.begin();
      std::advance(it, pick(0, next.size() - 1));
      next.erase(it);
    }
    for (int k = pick(0, 2); k > 0; --k) next.insert(atom(preds[pick(0, 2)]));
    if (pick(0, 1)) {
      st.delta = Delta{set_minus(next, s), set_minus(s, next)};
    } else {
      st.state = next;
    }
    t.steps.push_back(std::move(st));
    s = std::move(next);
  }
  return t;
}

}  // namespace testing_support
