#pragma once

// Observer-style action model learning.
//
// Each logged step is lifted into a candidate schema by replacing action
// arguments with positional parameters ?p0..?pn. Preconditions are the lifted
// pre-state atoms whose objects are all arguments; effects are the lifted
// pre/post differences. Candidates of one action are merged by intersecting
// preconditions and uniting effects, and the result is checked against every
// supporting observation.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gtp/error.hpp"
#include "gtp/pddl.hpp"
#include "gtp/trace.hpp"

namespace gtp {

/// One logged transition. Pre/post include static atoms.
struct ObservedInstance {
  ActionRef action;
  State pre;
  State post;
  std::string trace_id;
  std::size_t step = 0;
};

struct CandidateSchema {
  std::string name;
  std::vector<TypedParam> params;
  AtomSet pre;
  /// All liftings of observed add/delete atoms. A ground atom has more than
  /// one lifting when its objects occur at several argument positions.
  AtomSet add;
  AtomSet del;
  /// Effect atoms mentioning objects outside the arguments; dropped from add/del.
  AtomSet unliftable;
  ObservedInstance instance;
};

struct ActionLearnStats {
  std::size_t instances = 0;
  /// Preconditions dropped by each successive intersection.
  std::vector<std::size_t> dropped_preconditions;
};

struct LearnReport {
  std::map<std::string, ActionLearnStats> actions;
  std::vector<std::string> warnings;
};

inline std::string param_name(std::size_t i) { return "?p" + std::to_string(i); }

namespace detail {

/// Parameter names per object for the given argument tuple.
inline std::map<std::string, std::vector<std::string>> argument_positions(const std::vector<std::string>& args) {
  std::map<std::string, std::vector<std::string>> pos;
  for (std::size_t i = 0; i < args.size(); ++i) pos[args[i]].push_back(param_name(i));
  return pos;
}

/// Every lifting of `a`; empty if some object is not an argument.
inline std::vector<Atom> liftings(const Atom& a, const std::map<std::string, std::vector<std::string>>& pos) {
  std::vector<const std::vector<std::string>*> choices;
  for (const auto& o : a.args) {
    auto it = pos.find(o);
    if (it == pos.end()) return {};
    choices.push_back(&it->second);
  }
  std::vector<Atom> out{Atom{a.predicate, {}}};
  for (const auto* c : choices) {
    std::vector<Atom> next;
    for (const auto& partial : out) {
      for (const auto& v : *c) {
        Atom x = partial;
        x.args.push_back(v);
        next.push_back(std::move(x));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline std::unordered_map<std::string, std::string> binding_of(const ObservedInstance& inst) {
  std::unordered_map<std::string, std::string> b;
  for (std::size_t i = 0; i < inst.action.args.size(); ++i) b[param_name(i)] = inst.action.args[i];
  return b;
}

inline std::string where(const ObservedInstance& inst) {
  return "trace " + (inst.trace_id.empty() ? std::string("?") : inst.trace_id) + " step " + std::to_string(inst.step);
}

}  // namespace detail

inline CandidateSchema lift_instance(const ObservedInstance& inst, const std::map<std::string, std::string>& object_types) {
  CandidateSchema c;
  c.name = inst.action.name;
  c.instance = inst;
  for (std::size_t i = 0; i < inst.action.args.size(); ++i) {
    auto it = object_types.find(inst.action.args[i]);
    c.params.push_back({param_name(i), it == object_types.end() ? std::string(kRootType) : it->second});
  }
  const auto pos = detail::argument_positions(inst.action.args);
  for (const auto& a : inst.pre) {
    for (auto& l : detail::liftings(a, pos)) c.pre.insert(std::move(l));
  }
  auto lift_effects = [&](const AtomSet& ground, AtomSet& out) {
    for (const auto& a : ground) {
      auto ls = detail::liftings(a, pos);
      if (ls.empty()) {
        c.unliftable.insert(a);
        continue;
      }
      out.insert(ls.begin(), ls.end());
    }
  };
  lift_effects(set_minus(inst.post, inst.pre), c.add);
  lift_effects(set_minus(inst.pre, inst.post), c.del);
  return c;
}

struct MergeResult {
  ActionSchema schema;
  std::vector<std::size_t> dropped_preconditions;
};

inline MergeResult merge_candidates(const std::vector<CandidateSchema>& cands) {
  if (cands.empty()) throw LearnError(LearnError::Kind::EmptyInput, "no candidates to merge");
  const CandidateSchema& first = cands.front();
  for (const auto& c : cands) {
    if (c.name != first.name || c.params.size() != first.params.size()) {
      throw LearnError(LearnError::Kind::ArityMismatch,
                       "action " + c.name + " observed with " + std::to_string(c.params.size()) + " arguments at " +
                           detail::where(c.instance) + ", but with " + std::to_string(first.params.size()) + " at " +
                           detail::where(first.instance));
    }
    for (std::size_t i = 0; i < c.params.size(); ++i) {
      if (c.params[i].type != first.params[i].type) {
        throw LearnError(LearnError::Kind::TypeConflict,
                         "action " + c.name + " argument " + std::to_string(i) + " has type " + c.params[i].type +
                             " at " + detail::where(c.instance) + " but " + first.params[i].type + " at " +
                             detail::where(first.instance));
      }
    }
  }

  MergeResult r;
  ActionSchema& s = r.schema;
  s.name = first.name;
  s.params = first.params;
  s.pre = first.pre;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    AtomSet kept = set_intersection(s.pre, cands[k].pre);
    r.dropped_preconditions.push_back(s.pre.size() - kept.size());
    s.pre = std::move(kept);
  }

  std::vector<std::unordered_map<std::string, std::string>> bindings;
  bindings.reserve(cands.size());
  for (const auto& c : cands) bindings.push_back(detail::binding_of(c.instance));

  // A lifted add must ground into every post-state; a lifted delete must
  // ground outside every post-state. This resolves aliased liftings.
  for (const auto& c : cands) {
    for (const auto& l : c.add) {
      bool ok = true;
      for (std::size_t k = 0; k < cands.size() && ok; ++k) ok = cands[k].instance.post.contains(substitute(l, bindings[k]));
      if (ok) s.add.insert(l);
    }
    for (const auto& l : c.del) {
      bool ok = true;
      for (std::size_t k = 0; k < cands.size() && ok; ++k) ok = !cands[k].instance.post.contains(substitute(l, bindings[k]));
      if (ok) s.del.insert(l);
    }
  }

  for (std::size_t k = 0; k < cands.size(); ++k) {
    const ObservedInstance& inst = cands[k].instance;
    GroundAction g = instantiate(s, inst.action.args);
    State expected = set_minus(inst.pre, g.del);
    expected.insert(g.add.begin(), g.add.end());
    AtomSet missing = set_minus(set_minus(inst.post, expected), cands[k].unliftable);
    AtomSet extra = set_minus(set_minus(expected, inst.post), cands[k].unliftable);
    if (!missing.empty() || !extra.empty()) {
      throw LearnError(LearnError::Kind::EffectConflict,
                       "merged effects of " + s.name + " contradict " + to_string(inst.action) + " at " +
                           detail::where(inst) + ": not produced " + to_string(missing) + ", wrongly produced " +
                           to_string(extra));
    }
  }
  return r;
}

namespace detail {

inline std::vector<TypedParam> predicate_params(const std::vector<std::string>& types) {
  std::vector<TypedParam> out;
  for (std::size_t i = 0; i < types.size(); ++i) out.push_back({"?x" + std::to_string(i), types[i]});
  return out;
}

}  // namespace detail

struct LearnResult {
  Domain domain;
  LearnReport report;
};

/// Learns one schema per action name. `ids` names the traces in diagnostics.
inline LearnResult learn_domain(const std::vector<Trace>& traces, const std::string& name,
                                const std::vector<std::string>& ids = {}) {
  std::map<std::string, std::string> object_types;
  for (const auto& t : traces) {
    for (const auto& [obj, type] : t.header.objects) {
      auto [it, inserted] = object_types.emplace(obj, type);
      if (!inserted && it->second != type) {
        throw LearnError(LearnError::Kind::TypeConflict,
                         "object " + obj + " has type " + type + " in one trace and " + it->second + " in another");
      }
    }
  }

  LearnResult result;
  Domain& d = result.domain;
  d.name = name;
  for (const auto& [obj, type] : object_types) {
    if (type != kRootType) d.types.insert(type);
  }

  // Predicate signatures from every logged atom; positions with mixed types fall back to object.
  std::map<std::string, std::vector<std::string>> signature;
  auto note_atom = [&](const Atom& a) {
    std::vector<std::string> types;
    for (const auto& o : a.args) {
      auto it = object_types.find(o);
      types.push_back(it == object_types.end() ? std::string(kRootType) : it->second);
    }
    auto [it, inserted] = signature.emplace(a.predicate, types);
    if (!inserted) {
      if (it->second.size() != types.size()) {
        throw LearnError(LearnError::Kind::ArityMismatch, "predicate " + a.predicate + " logged with different arities");
      }
      for (std::size_t i = 0; i < types.size(); ++i) {
        if (it->second[i] != types[i]) it->second[i] = std::string(kRootType);
      }
    }
  };

  std::map<std::string, std::vector<ObservedInstance>> groups;
  for (std::size_t ti = 0; ti < traces.size(); ++ti) {
    const Trace& t = traces[ti];
    const std::string id = ti < ids.size() ? ids[ti] : std::to_string(ti);
    const auto states = reconstruct_states(t);
    for (const auto& a : t.header.statics) note_atom(a);
    for (const auto& s : states) {
      for (const auto& a : s) note_atom(a);
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      ObservedInstance inst;
      inst.action = t.steps[i].action;
      inst.pre = t.header.statics;
      inst.pre.insert(states[i].begin(), states[i].end());
      inst.post = t.header.statics;
      inst.post.insert(states[i + 1].begin(), states[i + 1].end());
      inst.trace_id = id;
      inst.step = i;
      groups[inst.action.name].push_back(std::move(inst));
    }
  }
  if (groups.empty()) throw LearnError(LearnError::Kind::EmptyInput, "no action steps in the given traces");

  for (const auto& [pred, types] : signature) {
    d.predicates[pred] = PredicateDecl{pred, detail::predicate_params(types)};
  }

  for (auto& [action, instances] : groups) {
    std::sort(instances.begin(), instances.end(), [](const ObservedInstance& a, const ObservedInstance& b) {
      return std::tie(a.action, a.pre, a.post, a.trace_id, a.step) < std::tie(b.action, b.pre, b.post, b.trace_id, b.step);
    });
    std::vector<CandidateSchema> cands;
    cands.reserve(instances.size());
    for (const auto& inst : instances) {
      CandidateSchema c = lift_instance(inst, object_types);
      for (const auto& a : c.unliftable) {
        result.report.warnings.push_back("UnliftableEffect: " + to_string(a) + " in " + to_string(inst.action) + " at " +
                                         detail::where(inst) + " mentions an object outside the arguments; dropped");
      }
      cands.push_back(std::move(c));
    }
    MergeResult merged = merge_candidates(cands);
    d.actions[action] = std::move(merged.schema);
    auto& stats = result.report.actions[action];
    stats.instances = instances.size();
    stats.dropped_preconditions = std::move(merged.dropped_preconditions);
  }
  return result;
}

inline nlohmann::json to_json(const LearnReport& r) {
  nlohmann::json j;
  j["actions"] = nlohmann::json::object();
  for (const auto& [name, s] : r.actions) {
    j["actions"][name] = {{"instances", s.instances}, {"dropped_preconditions", s.dropped_preconditions}};
  }
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace gtp
