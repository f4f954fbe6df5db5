#pragma once

// Test-scenario generation on top of the planner: goal templates, dead-end
// scanning from random reachable states, and shortcut proofs.

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <unordered_map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtp/error.hpp"
#include "gtp/pddl.hpp"
#include "gtp/pddl_io.hpp"
#include "gtp/planner.hpp"

namespace gtp {

struct GoalTemplate {
  struct Sampled {
    std::size_t k = 1;
    std::uint64_t seed = 0;
  };

  std::string name;
  std::vector<TypedParam> variables;
  std::vector<Atom> goal;
  /// Unset means every binding.
  std::optional<Sampled> sampled;
};

/// {"name":..., "variables":[{"name":"?q","type":"quest"}], "goal":[["quest-done","?q"]],
///  "mode":{"kind":"all"} | {"kind":"sampled","k":5,"seed":1}}
inline GoalTemplate parse_goal_template(const nlohmann::json& j) {
  try {
    GoalTemplate t;
    t.name = j.at("name").get<std::string>();
    for (const auto& v : j.value("variables", nlohmann::json::array())) {
      t.variables.push_back({v.at("name").get<std::string>(), v.at("type").get<std::string>()});
    }
    for (const auto& g : j.at("goal")) {
      auto parts = g.get<std::vector<std::string>>();
      if (parts.empty()) throw Error("empty goal pattern");
      t.goal.push_back({parts.front(), {parts.begin() + 1, parts.end()}});
    }
    if (auto mode = j.find("mode"); mode != j.end()) {
      const std::string kind = mode->at("kind").get<std::string>();
      if (kind == "sampled") {
        t.sampled = GoalTemplate::Sampled{mode->at("k").get<std::size_t>(), mode->at("seed").get<std::uint64_t>()};
      } else if (kind != "all") {
        throw Error("unknown template mode '" + kind + "'");
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid goal template: ") + e.what());
  }
}

inline void check_template(const Domain& d, const GoalTemplate& t) {
  std::set<std::string> used;
  for (const auto& a : t.goal) {
    auto it = d.predicates.find(a.predicate);
    if (it == d.predicates.end()) throw Error("template " + t.name + ": undeclared predicate '" + a.predicate + "'");
    if (it->second.params.size() != a.args.size()) throw Error("template " + t.name + ": arity mismatch in " + to_string(a));
    for (const auto& x : a.args) {
      if (is_variable(x)) used.insert(x);
    }
  }
  std::set<std::string> declared;
  for (const auto& v : t.variables) {
    if (!declared.insert(v.name).second) throw Error("template " + t.name + ": duplicate variable " + v.name);
    if (!is_variable(v.name)) throw Error("template " + t.name + ": variable names start with '?': " + v.name);
    if (v.type != kRootType && !d.types.contains(v.type)) throw Error("template " + t.name + ": unknown type " + v.type);
    if (!used.contains(v.name)) throw Error("template " + t.name + ": variable " + v.name + " occurs in no goal pattern");
  }
  for (const auto& x : used) {
    if (!declared.contains(x)) throw Error("template " + t.name + ": undeclared variable " + x);
  }
}

struct ScenarioProvenance {
  std::string template_name;
  std::map<std::string, std::string> binding;
  /// Random-walk origin of the initial state, if sampled.
  std::optional<std::uint64_t> walk_seed;
  std::optional<std::size_t> walk_steps;
};

struct ScenarioBatch {
  std::vector<Problem> problems;
  std::vector<ScenarioProvenance> provenance;
};

struct StartState {
  State state;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
};

inline ScenarioBatch instantiate_templates(const Domain& d, const Problem& base, const GoalTemplate& t,
                                           const std::optional<StartState>& start = std::nullopt) {
  check_template(d, t);
  std::vector<std::vector<std::string>> domains;
  for (const auto& v : t.variables) {
    std::vector<std::string> objs;
    for (const auto& [obj, type] : base.objects) {
      if (type_matches(v.type, type)) objs.push_back(obj);
    }
    if (objs.empty()) throw NoBindings("template " + t.name + ": no objects of type " + v.type + " for " + v.name);
    domains.push_back(std::move(objs));
  }

  std::vector<std::vector<std::string>> bindings{{}};
  for (const auto& objs : domains) {
    std::vector<std::vector<std::string>> next;
    for (const auto& partial : bindings) {
      for (const auto& o : objs) {
        auto b = partial;
        b.push_back(o);
        next.push_back(std::move(b));
      }
    }
    bindings = std::move(next);
  }
  if (t.sampled) {
    std::mt19937_64 rng(t.sampled->seed);
    std::vector<std::vector<std::string>> chosen;
    std::sample(bindings.begin(), bindings.end(), std::back_inserter(chosen), std::min(t.sampled->k, bindings.size()), rng);
    bindings = std::move(chosen);
  }

  ScenarioBatch batch;
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    std::unordered_map<std::string, std::string> sub;
    ScenarioProvenance prov;
    prov.template_name = t.name;
    for (std::size_t v = 0; v < t.variables.size(); ++v) {
      sub[t.variables[v].name] = bindings[i][v];
      prov.binding[t.variables[v].name] = bindings[i][v];
    }
    Problem p = base;
    p.name = base.name + "-" + t.name + "-" + std::to_string(i + 1);
    p.goal.clear();
    for (const auto& g : t.goal) p.goal.insert(substitute(g, sub));
    if (start) {
      p.init = start->state;
      prov.walk_seed = start->seed;
      prov.walk_steps = start->steps;
    }
    check_problem(d, p);
    batch.problems.push_back(std::move(p));
    batch.provenance.push_back(std::move(prov));
  }
  return batch;
}

inline nlohmann::json to_json(const ScenarioProvenance& p) {
  nlohmann::json j;
  j["template"] = p.template_name;
  j["binding"] = p.binding;
  if (p.walk_seed) j["walk"] = {{"seed", *p.walk_seed}, {"steps", *p.walk_steps}};
  return j;
}

/// Writes problem-0001.pddl, ... and manifest.json into `dir`.
inline void write_batch(const ScenarioBatch& batch, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["problems"] = nlohmann::json::array();
  for (std::size_t i = 0; i < batch.problems.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "problem-%04zu.pddl", i + 1);
    std::ofstream(dir / name, std::ios::binary) << print_problem(batch.problems[i]);
    auto entry = to_json(batch.provenance[i]);
    entry["file"] = name;
    entry["name"] = batch.problems[i].name;
    manifest["problems"].push_back(std::move(entry));
  }
  std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

enum class DeadEndVerdict { Ok, DeadEnd, Unknown };

inline std::string_view to_string(DeadEndVerdict v) {
  switch (v) {
    case DeadEndVerdict::Ok: return "OK";
    case DeadEndVerdict::DeadEnd: return "DEAD-END";
    case DeadEndVerdict::Unknown: return "UNKNOWN";
  }
  return "?";
}

struct DeadEndSample {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Plan walk;
  State state;
  DeadEndVerdict verdict = DeadEndVerdict::Unknown;
};

struct DeadEndReport {
  std::vector<DeadEndSample> samples;

  std::size_t count(DeadEndVerdict v) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [v](const auto& s) { return s.verdict == v; }));
  }
};

/// Seed of the i-th random walk; splitmix64 of (seed, i).
inline std::uint64_t sample_seed(std::uint64_t seed, std::size_t i) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(i) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class DeadEndSearch { Complete, Optimal };

/// Samples `n` states by `walk_steps`-step random walks and classifies each by
/// searching for `goal`. Complete mode runs exhaustive greedy search, Optimal
/// mode breadth-first search; both certify dead ends by exhausting the space.
inline DeadEndReport dead_end_scan(const Domain& d, const Problem& p, const AtomSet& goal, std::size_t n,
                                   std::size_t walk_steps, std::uint64_t seed, const SearchLimits& limits = {},
                                   DeadEndSearch mode = DeadEndSearch::Complete) {
  check_problem(d, p);
  GroundTask task(d, p);
  DeadEndReport r;
  for (std::size_t i = 0; i < n; ++i) {
    DeadEndSample s;
    s.index = i;
    s.seed = sample_seed(seed, i);
    RandomWalk walk = random_walk(task, task.init(), walk_steps, s.seed);
    s.walk = std::move(walk.actions);
    s.state = std::move(walk.state);
    PackedState packed = task.pack(s.state);
    SearchResult res = mode == DeadEndSearch::Complete ? plan_gbfs(task, packed, goal, limits)
                                                       : plan_optimal(task, packed, goal, std::nullopt, limits);
    switch (res.outcome) {
      case SearchResult::Outcome::Plan: s.verdict = DeadEndVerdict::Ok; break;
      case SearchResult::Outcome::ProvedNoPlan: s.verdict = DeadEndVerdict::DeadEnd; break;
      default: s.verdict = DeadEndVerdict::Unknown; break;
    }
    r.samples.push_back(std::move(s));
  }
  return r;
}

inline nlohmann::json to_json(const DeadEndReport& r) {
  nlohmann::json j;
  j["summary"] = {{"samples", r.samples.size()},
                  {"ok", r.count(DeadEndVerdict::Ok)},
                  {"dead_ends", r.count(DeadEndVerdict::DeadEnd)},
                  {"unknown", r.count(DeadEndVerdict::Unknown)}};
  j["dead_ends"] = nlohmann::json::array();
  j["samples"] = nlohmann::json::array();
  for (const auto& s : r.samples) {
    j["samples"].push_back({{"index", s.index}, {"seed", s.seed}, {"verdict", std::string(to_string(s.verdict))}});
    if (s.verdict != DeadEndVerdict::DeadEnd) continue;
    nlohmann::json walk = nlohmann::json::array();
    for (const auto& a : s.walk) walk.push_back(to_string(a));
    nlohmann::json state = nlohmann::json::array();
    for (const auto& a : s.state) state.push_back(to_string(a));
    j["dead_ends"].push_back({{"index", s.index}, {"seed", s.seed}, {"walk", walk}, {"state", state}});
  }
  return j;
}

// ---------------------------------------------------------------------------

enum class ShortcutVerdict { NoShortcut, ShortcutFound, Inconclusive };

inline std::string_view to_string(ShortcutVerdict v) {
  switch (v) {
    case ShortcutVerdict::NoShortcut: return "NO-SHORTCUT";
    case ShortcutVerdict::ShortcutFound: return "SHORTCUT-FOUND";
    case ShortcutVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct ShortcutReport {
  ShortcutVerdict verdict = ShortcutVerdict::Inconclusive;
  std::size_t bound = 0;
  Plan witness;
  SearchStats stats;
};

/// NO-SHORTCUT iff no plan shorter than `bound` exists.
inline ShortcutReport shortcut_check(const Domain& d, const Problem& p, std::size_t bound, const SearchLimits& limits = {}) {
  ShortcutReport r;
  r.bound = bound;
  if (bound == 0) {
    r.verdict = ShortcutVerdict::NoShortcut;
    return r;
  }
  SearchResult res = plan_optimal(d, p, bound - 1, limits);
  r.stats = res.stats;
  switch (res.outcome) {
    case SearchResult::Outcome::Plan:
      r.verdict = ShortcutVerdict::ShortcutFound;
      r.witness = std::move(res.plan);
      break;
    case SearchResult::Outcome::ProvedNoPlan:
    case SearchResult::Outcome::ProvedNoPlanWithinBound:
      r.verdict = ShortcutVerdict::NoShortcut;
      break;
    case SearchResult::Outcome::ResourceLimit:
      r.verdict = ShortcutVerdict::Inconclusive;
      break;
  }
  return r;
}

inline nlohmann::json to_json(const ShortcutReport& r) {
  nlohmann::json j;
  j["verdict"] = std::string(to_string(r.verdict));
  j["bound"] = r.bound;
  if (r.verdict == ShortcutVerdict::ShortcutFound) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& a : r.witness) w.push_back(to_string(a));
    j["witness"] = w;
    j["witness_length"] = r.witness.size();
  }
  j["statistics"] = {{"expanded", r.stats.expanded}, {"generated", r.stats.generated}, {"seconds", r.stats.seconds}};
  return j;
}

}  // namespace gtp
