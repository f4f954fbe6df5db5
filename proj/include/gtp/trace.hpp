#pragma once

// gtrace-1: JSON Lines gameplay logs.
//
//   line 1   {"format":"gtrace-1","objects":{...},"static":[...],"init":[...]}
//   line k   {"step":k-2,"action":{"name":..,"args":[..]},"delta":{"add":[..],"del":[..]}}
//            (or "state":[..] with the full dynamic state after the action)
//
// Atoms are string arrays: ["neighbours","t0-1","t0-2"].

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtp/error.hpp"
#include "gtp/pddl.hpp"

namespace gtp {

inline constexpr std::string_view kTraceFormat = "gtrace-1";

struct TraceHeader {
  std::string format{kTraceFormat};
  std::map<std::string, std::string> objects;
  AtomSet statics;
  State init;
  bool operator==(const TraceHeader&) const = default;
};

struct Delta {
  AtomSet add;
  AtomSet del;
  bool operator==(const Delta&) const = default;
};

/// One logged action. At least one of `delta` and `state` is set.
struct TraceStep {
  std::size_t index = 0;
  ActionRef action;
  std::optional<Delta> delta;
  std::optional<State> state;
  bool operator==(const TraceStep&) const = default;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceStep> steps;
  bool operator==(const Trace&) const = default;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson atom_json(const Atom& a) {
  ojson arr = ojson::array();
  arr.push_back(a.predicate);
  for (const auto& x : a.args) arr.push_back(x);
  return arr;
}

inline ojson atoms_json(const AtomSet& atoms) {
  ojson arr = ojson::array();
  for (const auto& a : atoms) arr.push_back(atom_json(a));
  return arr;
}

inline Atom atom_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_array() || j.empty()) throw FormatError(line, "atom must be a non-empty array of strings");
  Atom a;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw FormatError(line, "atom must be a non-empty array of strings");
    if (i == 0) {
      a.predicate = j[i].get<std::string>();
    } else {
      a.args.push_back(j[i].get<std::string>());
    }
  }
  return a;
}

inline AtomSet atoms_from_json(const nlohmann::json& j, std::size_t line, std::string_view field) {
  if (!j.is_array()) throw FormatError(line, "'" + std::string(field) + "' must be an array of atoms");
  AtomSet out;
  for (const auto& e : j) out.insert(atom_from_json(e, line));
  return out;
}

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(line, std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace detail

inline std::string write_trace(const Trace& t) {
  using detail::ojson;
  std::string out;
  ojson header;
  header["format"] = t.header.format;
  ojson objects = ojson::object();
  for (const auto& [obj, type] : t.header.objects) objects[obj] = type;
  header["objects"] = std::move(objects);
  header["static"] = detail::atoms_json(t.header.statics);
  header["init"] = detail::atoms_json(t.header.init);
  out += header.dump() + "\n";
  for (const auto& s : t.steps) {
    ojson line;
    line["step"] = s.index;
    ojson action;
    action["name"] = s.action.name;
    action["args"] = s.action.args;
    line["action"] = std::move(action);
    if (s.delta) {
      ojson delta;
      delta["add"] = detail::atoms_json(s.delta->add);
      delta["del"] = detail::atoms_json(s.delta->del);
      line["delta"] = std::move(delta);
    }
    if (s.state) line["state"] = detail::atoms_json(*s.state);
    out += line.dump() + "\n";
  }
  return out;
}

inline void write_trace_file(const Trace& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << write_trace(t);
  if (!os) throw Error("failed writing " + path);
}

inline Trace read_trace(std::istream& in) {
  Trace t;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  State current;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError(line_no, "expected a JSON object");

    try {
      if (!have_header) {
        const auto& fmt = detail::field(j, "format", line_no);
        if (!fmt.is_string()) throw FormatError(line_no, "'format' must be a string");
        if (fmt.get<std::string>() != kTraceFormat) throw VersionError("unknown trace format '" + fmt.get<std::string>() + "'");
        t.header.format = fmt.get<std::string>();
        const auto& objects = detail::field(j, "objects", line_no);
        if (!objects.is_object()) throw FormatError(line_no, "'objects' must be an object");
        for (const auto& [obj, type] : objects.items()) {
          if (!type.is_string()) throw FormatError(line_no, "type of object '" + obj + "' must be a string");
          t.header.objects[obj] = type.get<std::string>();
        }
        t.header.statics = detail::atoms_from_json(detail::field(j, "static", line_no), line_no, "static");
        t.header.init = detail::atoms_from_json(detail::field(j, "init", line_no), line_no, "init");
        current = t.header.init;
        have_header = true;
        continue;
      }

      TraceStep step;
      const auto& idx = detail::field(j, "step", line_no);
      if (!idx.is_number_unsigned()) throw FormatError(line_no, "'step' must be a non-negative integer");
      step.index = idx.get<std::size_t>();
      const auto& action = detail::field(j, "action", line_no);
      if (!action.is_object()) throw FormatError(line_no, "'action' must be an object");
      const auto& name = detail::field(action, "name", line_no);
      if (!name.is_string()) throw FormatError(line_no, "action name must be a string");
      step.action.name = name.get<std::string>();
      const auto& args = detail::field(action, "args", line_no);
      if (!args.is_array()) throw FormatError(line_no, "action args must be an array");
      for (const auto& a : args) {
        if (!a.is_string()) throw FormatError(line_no, "action args must be strings");
        step.action.args.push_back(a.get<std::string>());
      }
      if (auto it = j.find("delta"); it != j.end()) {
        if (!it->is_object()) throw FormatError(line_no, "'delta' must be an object");
        Delta d;
        d.add = detail::atoms_from_json(detail::field(*it, "add", line_no), line_no, "add");
        d.del = detail::atoms_from_json(detail::field(*it, "del", line_no), line_no, "del");
        for (const auto& a : d.del) {
          if (d.add.contains(a)) throw FormatError(line_no, "atom " + to_string(a) + " both added and deleted");
          if (!current.contains(a)) throw FormatError(line_no, "deleted atom " + to_string(a) + " is not in the previous state");
        }
        step.delta = std::move(d);
      }
      if (auto it = j.find("state"); it != j.end()) step.state = detail::atoms_from_json(*it, line_no, "state");
      if (!step.delta && !step.state) throw FormatError(line_no, "step needs 'delta' or 'state'");
      if (step.state) {
        current = *step.state;
      } else {
        current = set_minus(current, step.delta->del);
        current.insert(step.delta->add.begin(), step.delta->add.end());
      }
      t.steps.push_back(std::move(step));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(line_no, e.what());
    }
  }
  if (!have_header) throw FormatError(line_no + 1, "missing gtrace-1 header");
  return t;
}

inline Trace read_trace_text(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in);
}

inline Trace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_trace(in);
}

/// Full dynamic states: element 0 is the header init, element i+1 follows step i.
inline std::vector<State> reconstruct_states(const Trace& t) {
  std::vector<State> states;
  states.reserve(t.steps.size() + 1);
  states.push_back(t.header.init);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const TraceStep& s = t.steps[i];
    const State& prev = states.back();
    std::optional<State> from_delta;
    if (s.delta) {
      for (const auto& a : s.delta->del) {
        if (!prev.contains(a)) throw InconsistentStep(i, "deleted atom " + to_string(a) + " is not in the previous state");
      }
      State next = set_minus(prev, s.delta->del);
      next.insert(s.delta->add.begin(), s.delta->add.end());
      from_delta = std::move(next);
    }
    if (s.state && from_delta && *s.state != *from_delta) {
      throw InconsistentStep(i, "logged state differs from delta reconstruction: missing " +
                                    to_string(set_minus(*from_delta, *s.state)) + ", extra " +
                                    to_string(set_minus(*s.state, *from_delta)));
    }
    states.push_back(s.state ? *s.state : std::move(*from_delta));
  }
  return states;
}

struct TraceFinding {
  enum class Kind {
    ArityMismatch,
    ActionArityMismatch,
    UndeclaredObject,
    NonConsecutiveIndex,
    StaticMutated,
    StaticDynamicOverlap,
    InconsistentStep,
  };
  Kind kind;
  std::optional<std::size_t> step;
  std::string message;
};

inline std::string_view to_string(TraceFinding::Kind k) {
  switch (k) {
    case TraceFinding::Kind::ArityMismatch: return "ArityMismatch";
    case TraceFinding::Kind::ActionArityMismatch: return "ActionArityMismatch";
    case TraceFinding::Kind::UndeclaredObject: return "UndeclaredObject";
    case TraceFinding::Kind::NonConsecutiveIndex: return "NonConsecutiveIndex";
    case TraceFinding::Kind::StaticMutated: return "StaticMutated";
    case TraceFinding::Kind::StaticDynamicOverlap: return "StaticDynamicOverlap";
    case TraceFinding::Kind::InconsistentStep: return "InconsistentStep";
  }
  return "?";
}

struct WellformednessReport {
  std::vector<TraceFinding> findings;
  bool ok() const { return findings.empty(); }
};

inline WellformednessReport check_wellformed(const Trace& t) {
  using Kind = TraceFinding::Kind;
  WellformednessReport r;
  std::map<std::string, std::size_t> arity;
  std::map<std::string, std::size_t> action_arity;
  std::set<std::string> static_preds;
  for (const auto& a : t.header.statics) static_preds.insert(a.predicate);

  auto add = [&](Kind k, std::optional<std::size_t> step, std::string msg) {
    r.findings.push_back({k, step, std::move(msg)});
  };
  auto check_atom = [&](const Atom& a, std::optional<std::size_t> step) {
    auto [it, inserted] = arity.emplace(a.predicate, a.args.size());
    if (!inserted && it->second != a.args.size()) {
      add(Kind::ArityMismatch, step, "predicate " + a.predicate + " used with " + std::to_string(a.args.size()) +
                                         " arguments, previously " + std::to_string(it->second) + ": " + to_string(a));
    }
    for (const auto& o : a.args) {
      if (!t.header.objects.contains(o)) add(Kind::UndeclaredObject, step, "undeclared object '" + o + "' in " + to_string(a));
    }
  };
  auto check_dynamic = [&](const Atom& a, std::optional<std::size_t> step) {
    check_atom(a, step);
    if (static_preds.contains(a.predicate)) {
      add(step ? Kind::StaticMutated : Kind::StaticDynamicOverlap, step,
          step ? "static predicate mutated: " + to_string(a) : "static predicate in initial dynamic state: " + to_string(a));
    }
  };

  for (const auto& a : t.header.statics) check_atom(a, std::nullopt);
  for (const auto& a : t.header.init) check_dynamic(a, std::nullopt);

  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const TraceStep& s = t.steps[i];
    if (s.index != i) {
      add(Kind::NonConsecutiveIndex, i, "step index " + std::to_string(s.index) + " at position " + std::to_string(i));
    }
    auto [it, inserted] = action_arity.emplace(s.action.name, s.action.args.size());
    if (!inserted && it->second != s.action.args.size()) {
      add(Kind::ActionArityMismatch, i, "action " + s.action.name + " has " + std::to_string(s.action.args.size()) +
                                            " arguments, earlier steps had " + std::to_string(it->second));
    }
    for (const auto& o : s.action.args) {
      if (!t.header.objects.contains(o)) add(Kind::UndeclaredObject, i, "undeclared object '" + o + "' in action " + to_string(s.action));
    }
    if (s.delta) {
      for (const auto& a : s.delta->add) check_dynamic(a, i);
      for (const auto& a : s.delta->del) check_dynamic(a, i);
    }
    if (s.state) {
      for (const auto& a : *s.state) check_dynamic(a, i);
    }
  }

  try {
    reconstruct_states(t);
  } catch (const InconsistentStep& e) {
    add(Kind::InconsistentStep, e.step(), e.what());
  }
  return r;
}

/// Planning problem over the trace's objects: init = static ∪ header init.
inline Problem problem_from_trace(const Trace& t, std::string name, std::string domain_name, AtomSet goal) {
  Problem p;
  p.name = std::move(name);
  p.domain_name = std::move(domain_name);
  p.objects = t.header.objects;
  p.init = t.header.statics;
  p.init.insert(t.header.init.begin(), t.header.init.end());
  p.goal = std::move(goal);
  return p;
}

}  // namespace gtp
