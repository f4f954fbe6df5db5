#pragma once

// Grounding with delete-relaxation reachability pruning.
//
// Starting from the initial atoms, every schema is instantiated with all
// type-correct bindings whose preconditions are relaxed-reachable; their add
// effects extend the reachable set until a fixpoint.

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtp/pddl.hpp"

namespace gtp {

namespace detail {

class SchemaBinder {
 public:
  SchemaBinder(const ActionSchema& schema, const std::map<std::string, std::vector<std::string>>& objects_by_type,
               const std::map<std::string, std::string>& object_types,
               const std::map<std::string, std::vector<const Atom*>>& facts)
      : schema_(schema), by_type_(objects_by_type), object_types_(object_types), facts_(facts) {
    for (const auto& p : schema.params) param_type_[p.name] = p.type;
    order_preconditions();
  }

  template <typename Emit>
  void run(Emit&& emit) {
    std::unordered_map<std::string, std::string> binding;
    match(0, binding, emit);
  }

 private:
  template <typename Emit>
  void match(std::size_t i, std::unordered_map<std::string, std::string>& binding, Emit& emit) {
    if (i == pre_.size()) {
      enumerate_free(0, binding, emit);
      return;
    }
    const Atom& pattern = pre_[i];
    auto it = facts_.find(pattern.predicate);
    if (it == facts_.end()) return;
    for (const Atom* fact : it->second) {
      if (fact->args.size() != pattern.args.size()) continue;
      std::vector<std::string> newly_bound;
      bool ok = true;
      for (std::size_t k = 0; k < pattern.args.size() && ok; ++k) {
        const std::string& term = pattern.args[k];
        const std::string& obj = fact->args[k];
        if (!is_variable(term)) {
          ok = term == obj;
          continue;
        }
        auto b = binding.find(term);
        if (b != binding.end()) {
          ok = b->second == obj;
        } else {
          auto ot = object_types_.find(obj);
          ok = ot != object_types_.end() && type_matches(param_type_.at(term), ot->second);
          if (ok) {
            binding.emplace(term, obj);
            newly_bound.push_back(term);
          }
        }
      }
      if (ok) match(i + 1, binding, emit);
      for (const auto& v : newly_bound) binding.erase(v);
    }
  }

  template <typename Emit>
  void enumerate_free(std::size_t k, std::unordered_map<std::string, std::string>& binding, Emit& emit) {
    if (k == schema_.params.size()) {
      std::vector<std::string> args;
      args.reserve(schema_.params.size());
      for (const auto& p : schema_.params) args.push_back(binding.at(p.name));
      emit(args);
      return;
    }
    const TypedParam& p = schema_.params[k];
    if (binding.contains(p.name)) {
      enumerate_free(k + 1, binding, emit);
      return;
    }
    auto it = by_type_.find(p.type);
    if (it == by_type_.end()) return;
    for (const auto& obj : it->second) {
      binding[p.name] = obj;
      enumerate_free(k + 1, binding, emit);
    }
    binding.erase(p.name);
  }

  std::size_t fact_count(const std::string& predicate) const {
    auto it = facts_.find(predicate);
    return it == facts_.end() ? 0 : it->second.size();
  }

  // Greedy join order: most already-bound variables first, then fewest facts.
  void order_preconditions() {
    std::vector<Atom> rest(schema_.pre.begin(), schema_.pre.end());
    std::set<std::string> bound;
    while (!rest.empty()) {
      std::size_t best = 0;
      auto score = [&](const Atom& a) {
        std::size_t free = 0;
        for (const auto& x : a.args) free += is_variable(x) && !bound.contains(x);
        return std::pair{free, fact_count(a.predicate)};
      };
      for (std::size_t i = 1; i < rest.size(); ++i) {
        if (score(rest[i]) < score(rest[best])) best = i;
      }
      for (const auto& x : rest[best].args) {
        if (is_variable(x)) bound.insert(x);
      }
      pre_.push_back(std::move(rest[best]));
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(best));
    }
  }

  const ActionSchema& schema_;
  const std::map<std::string, std::vector<std::string>>& by_type_;
  const std::map<std::string, std::string>& object_types_;
  const std::map<std::string, std::vector<const Atom*>>& facts_;
  std::vector<Atom> pre_;
  std::unordered_map<std::string, std::string> param_type_;
};

}  // namespace detail

/// All type-correct ground actions whose preconditions are reachable under
/// delete relaxation from `p.init`, sorted by (name, args).
inline std::vector<GroundAction> ground(const Domain& d, const Problem& p) {
  std::map<std::string, std::vector<std::string>> by_type;
  for (const auto& [obj, type] : p.objects) {
    by_type[type].push_back(obj);
    by_type[std::string(kRootType)].push_back(obj);
  }

  AtomSet reached = p.init;
  std::map<ActionRef, GroundAction> found;
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, std::vector<const Atom*>> facts;
    for (const auto& a : reached) facts[a.predicate].push_back(&a);

    AtomSet fresh;
    for (const auto& [name, schema] : d.actions) {
      detail::SchemaBinder binder(schema, by_type, p.objects, facts);
      binder.run([&](const std::vector<std::string>& args) {
        ActionRef ref{schema.name, args};
        if (found.contains(ref)) return;
        GroundAction ga = instantiate(schema, args);
        for (const auto& a : ga.add) {
          if (!reached.contains(a)) fresh.insert(a);
        }
        found.emplace(std::move(ref), std::move(ga));
        changed = true;
      });
    }
    reached.insert(fresh.begin(), fresh.end());
  }

  std::vector<GroundAction> out;
  out.reserve(found.size());
  for (auto& [ref, ga] : found) out.push_back(std::move(ga));
  return out;
}

}  // namespace gtp
