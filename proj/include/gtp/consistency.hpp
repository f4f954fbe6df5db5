#pragma once

// Model-vs-log consistency: every logged step must be applicable under the
// domain and its exact successor must equal the logged post-state.

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "gtp/pddl.hpp"
#include "gtp/trace.hpp"

namespace gtp {

struct ConsistencyFinding {
  enum class Kind {
    MissingPrecondition,
    UnexpectedAdd,
    MissingAdd,
    UnexpectedDelete,
    MissingDelete,
    UnknownAction,
    ArityMismatch,
  };
  std::string trace_id;
  std::size_t step = 0;
  Kind kind = Kind::UnknownAction;
  AtomSet atoms;

  auto key() const { return std::tie(trace_id, step, kind); }
};

inline std::string_view to_string(ConsistencyFinding::Kind k) {
  using K = ConsistencyFinding::Kind;
  switch (k) {
    case K::MissingPrecondition: return "MissingPrecondition";
    case K::UnexpectedAdd: return "UnexpectedAdd";
    case K::MissingAdd: return "MissingAdd";
    case K::UnexpectedDelete: return "UnexpectedDelete";
    case K::MissingDelete: return "MissingDelete";
    case K::UnknownAction: return "UnknownAction";
    case K::ArityMismatch: return "ArityMismatch";
  }
  return "?";
}

struct ConsistencyReport {
  std::vector<ConsistencyFinding> findings;
  std::size_t traces = 0;
  std::size_t steps = 0;
  bool consistent() const { return findings.empty(); }
};

/// Checks one step: `pre` and `post` include static atoms.
inline void check_step(const Domain& d, const ActionRef& action, const State& pre, const State& post,
                       const std::string& trace_id, std::size_t step, std::vector<ConsistencyFinding>& out) {
  using K = ConsistencyFinding::Kind;
  const ActionSchema* schema = d.find_action(action.name);
  if (schema == nullptr) {
    out.push_back({trace_id, step, K::UnknownAction, {}});
    return;
  }
  if (schema->params.size() != action.args.size()) {
    out.push_back({trace_id, step, K::ArityMismatch, {}});
    return;
  }
  GroundAction g = instantiate(*schema, action.args);
  auto report = [&](K kind, AtomSet atoms) {
    if (!atoms.empty()) out.push_back({trace_id, step, kind, std::move(atoms)});
  };
  report(K::MissingPrecondition, set_minus(g.pre, pre));
  // expected = (pre \ del) ∪ add; the four sets below partition expected Δ post.
  report(K::UnexpectedAdd, set_minus(g.add, post));
  report(K::MissingAdd, set_minus(set_minus(post, pre), g.add));
  report(K::UnexpectedDelete, set_minus(set_intersection(set_intersection(g.del, pre), post), g.add));
  report(K::MissingDelete, set_minus(set_minus(pre, post), g.del));
}

/// Reports every finding across all traces, sorted by (trace id, step, kind).
/// Traces are assumed well-formed; `ids` defaults to the trace positions.
inline ConsistencyReport check_consistency(const Domain& d, const std::vector<Trace>& traces,
                                           const std::vector<std::string>& ids = {}) {
  ConsistencyReport r;
  r.traces = traces.size();
  for (std::size_t ti = 0; ti < traces.size(); ++ti) {
    const Trace& t = traces[ti];
    const std::string id = ti < ids.size() ? ids[ti] : std::to_string(ti);
    const auto states = reconstruct_states(t);
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      State pre = t.header.statics;
      pre.insert(states[i].begin(), states[i].end());
      State post = t.header.statics;
      post.insert(states[i + 1].begin(), states[i + 1].end());
      check_step(d, t.steps[i].action, pre, post, id, i, r.findings);
      ++r.steps;
    }
  }
  std::stable_sort(r.findings.begin(), r.findings.end(),
                   [](const ConsistencyFinding& a, const ConsistencyFinding& b) { return a.key() < b.key(); });
  return r;
}

inline nlohmann::json to_json(const ConsistencyReport& r) {
  nlohmann::json j;
  j["verdict"] = r.consistent() ? "CONSISTENT" : "INCONSISTENT";
  nlohmann::json findings = nlohmann::json::array();
  std::map<std::string, std::size_t> by_kind;
  for (const auto& f : r.findings) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : f.atoms) atoms.push_back(to_string(a));
    findings.push_back({{"trace", f.trace_id}, {"step", f.step}, {"kind", std::string(to_string(f.kind))}, {"atoms", atoms}});
    ++by_kind[std::string(to_string(f.kind))];
  }
  j["findings"] = std::move(findings);
  j["summary"] = {{"traces", r.traces}, {"steps", r.steps}, {"findings", r.findings.size()}, {"by_kind", by_kind}};
  return j;
}

}  // namespace gtp
