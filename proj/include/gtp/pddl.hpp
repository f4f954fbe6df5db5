#pragma once

// STRIPS data model and state-transition semantics.
//
// States are closed-world sorted atom sets. Atom ordering is predicate name,
// then arguments lexicographically, which makes printing and hashing stable.

#include <algorithm>
#include <compare>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gtp/error.hpp"

namespace gtp {

inline constexpr std::string_view kRootType = "object";

inline bool is_variable(std::string_view term) { return !term.empty() && term.front() == '?'; }

struct Atom {
  std::string predicate;
  std::vector<std::string> args;

  auto operator<=>(const Atom&) const = default;
  bool operator==(const Atom&) const = default;

  bool is_ground() const {
    return std::none_of(args.begin(), args.end(), [](const std::string& a) { return is_variable(a); });
  }
};

using AtomSet = std::set<Atom>;
using State = AtomSet;

inline std::string to_string(const Atom& atom) {
  std::string out = "(" + atom.predicate;
  for (const auto& a : atom.args) out += " " + a;
  return out + ")";
}

inline std::string to_string(const AtomSet& atoms) {
  std::string out = "{";
  bool first = true;
  for (const auto& a : atoms) {
    if (!first) out += ", ";
    out += to_string(a);
    first = false;
  }
  return out + "}";
}

struct TypedParam {
  std::string name;
  std::string type;
  auto operator<=>(const TypedParam&) const = default;
  bool operator==(const TypedParam&) const = default;
};

struct PredicateDecl {
  std::string name;
  std::vector<TypedParam> params;
  bool operator==(const PredicateDecl&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<TypedParam> params;
  AtomSet pre;
  AtomSet add;
  AtomSet del;
  bool operator==(const ActionSchema&) const = default;
};

/// Lifted STRIPS domain. Types are flat; `object` is the implicit root.
struct Domain {
  std::string name;
  std::set<std::string> types;
  std::map<std::string, PredicateDecl> predicates;
  std::map<std::string, ActionSchema> actions;
  bool operator==(const Domain&) const = default;

  const ActionSchema* find_action(std::string_view action) const {
    auto it = actions.find(std::string(action));
    return it == actions.end() ? nullptr : &it->second;
  }
};

struct Problem {
  std::string name;
  std::string domain_name;
  std::map<std::string, std::string> objects;  // object -> type
  State init;
  AtomSet goal;
  bool operator==(const Problem&) const = default;
};

/// Name and arguments of a ground action, as it appears in a plan file.
struct ActionRef {
  std::string name;
  std::vector<std::string> args;
  auto operator<=>(const ActionRef&) const = default;
  bool operator==(const ActionRef&) const = default;
};

inline std::string to_string(const ActionRef& ref) {
  std::string out = "(" + ref.name;
  for (const auto& a : ref.args) out += " " + a;
  return out + ")";
}

using Plan = std::vector<ActionRef>;

struct GroundAction {
  std::string name;
  std::vector<std::string> args;
  AtomSet pre;
  AtomSet add;
  AtomSet del;

  ActionRef ref() const { return {name, args}; }
  bool operator==(const GroundAction&) const = default;
};

inline bool type_matches(std::string_view declared, std::string_view actual) {
  return declared == kRootType || declared == actual;
}

inline Atom substitute(const Atom& atom, const std::unordered_map<std::string, std::string>& binding) {
  Atom out{atom.predicate, {}};
  out.args.reserve(atom.args.size());
  for (const auto& t : atom.args) {
    auto it = binding.find(t);
    out.args.push_back(it == binding.end() ? t : it->second);
  }
  return out;
}

inline AtomSet substitute(const AtomSet& atoms, const std::unordered_map<std::string, std::string>& binding) {
  AtomSet out;
  for (const auto& a : atoms) out.insert(substitute(a, binding));
  return out;
}

/// Binds schema parameters positionally to `args`. No type checking.
inline GroundAction instantiate(const ActionSchema& schema, const std::vector<std::string>& args) {
  if (args.size() != schema.params.size()) {
    throw Error("action " + schema.name + " expects " + std::to_string(schema.params.size()) + " arguments, got " +
                std::to_string(args.size()));
  }
  std::unordered_map<std::string, std::string> binding;
  for (std::size_t i = 0; i < args.size(); ++i) binding[schema.params[i].name] = args[i];
  return {schema.name, args, substitute(schema.pre, binding), substitute(schema.add, binding),
          substitute(schema.del, binding)};
}

inline bool applicable(const State& s, const GroundAction& a) {
  return std::includes(s.begin(), s.end(), a.pre.begin(), a.pre.end());
}

/// (s \ del) ∪ add
inline State apply(const State& s, const GroundAction& a) {
  if (!applicable(s, a)) {
    AtomSet missing;
    std::set_difference(a.pre.begin(), a.pre.end(), s.begin(), s.end(), std::inserter(missing, missing.end()));
    throw NotApplicable(to_string(a.ref()) + " not applicable, missing " + to_string(missing));
  }
  State out;
  std::set_difference(s.begin(), s.end(), a.del.begin(), a.del.end(), std::inserter(out, out.end()));
  out.insert(a.add.begin(), a.add.end());
  return out;
}

inline bool satisfies(const State& s, const AtomSet& goal) {
  return std::includes(s.begin(), s.end(), goal.begin(), goal.end());
}

inline AtomSet set_minus(const AtomSet& a, const AtomSet& b) {
  AtomSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

inline AtomSet set_intersection(const AtomSet& a, const AtomSet& b) {
  AtomSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

struct ValidationReport {
  bool valid = false;
  /// Index of the first inapplicable step; unset when every step applied.
  std::optional<std::size_t> failed_step;
  /// Missing precondition atoms at `failed_step`, or unmet goal atoms.
  AtomSet missing;
  State final_state;
};

/// Resolves a plan step against the domain, checking arity and object types.
inline GroundAction resolve(const Domain& d, const Problem& p, const ActionRef& step) {
  const ActionSchema* schema = d.find_action(step.name);
  if (schema == nullptr) throw UnknownAction("unknown action '" + step.name + "'");
  if (schema->params.size() != step.args.size()) {
    throw UnknownAction("action '" + step.name + "' takes " + std::to_string(schema->params.size()) +
                        " arguments, plan step has " + std::to_string(step.args.size()));
  }
  for (std::size_t i = 0; i < step.args.size(); ++i) {
    auto it = p.objects.find(step.args[i]);
    if (it == p.objects.end()) throw UnknownAction("undeclared object '" + step.args[i] + "' in " + to_string(step));
    if (!type_matches(schema->params[i].type, it->second)) {
      throw UnknownAction("object '" + step.args[i] + "' has type " + it->second + ", expected " +
                          schema->params[i].type + " in " + to_string(step));
    }
  }
  return instantiate(*schema, step.args);
}

inline ValidationReport validate_plan(const Domain& d, const Problem& p, const Plan& plan) {
  ValidationReport report;
  State s = p.init;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    GroundAction a = resolve(d, p, plan[i]);
    if (!applicable(s, a)) {
      report.failed_step = i;
      report.missing = set_minus(a.pre, s);
      report.final_state = std::move(s);
      return report;
    }
    s = gtp::apply(s, a);
  }
  report.missing = set_minus(p.goal, s);
  report.valid = report.missing.empty();
  report.final_state = std::move(s);
  return report;
}

}  // namespace gtp
