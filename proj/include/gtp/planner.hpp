#pragma once

// Forward state-space search over the grounded task.
//
//  - plan_gbfs:    greedy best-first search on h_add, ties broken FIFO.
//  - plan_optimal: breadth-first search with duplicate detection (unit costs).
//  - random_walk:  seeded uniform sampling of applicable actions.
//
// States are packed bitsets over the fluent atoms (atoms some action adds or
// deletes); static atoms are checked once at grounding time.

#include <chrono>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "gtp/grounding.hpp"
#include "gtp/pddl.hpp"
#include "gtp/pddl_io.hpp"

namespace gtp {

using Cost = std::uint64_t;
inline constexpr Cost kInfiniteCost = std::numeric_limits<Cost>::max();

using PackedState = std::vector<std::uint64_t>;

/// Grounded STRIPS task with integer-indexed fluents.
class GroundTask {
 public:
  struct Operator {
    ActionRef ref;
    std::vector<std::uint32_t> pre;
    std::vector<std::uint32_t> add;
    std::vector<std::uint32_t> del;
  };

  GroundTask(const Domain& d, const Problem& p) : GroundTask(p, ground(d, p)) {}

  GroundTask(const Problem& p, const std::vector<GroundAction>& actions) {
    for (const auto& ga : actions) {
      for (const auto& a : ga.add) intern(a);
      for (const auto& a : ga.del) intern(a);
    }
    words_ = (fluents_.size() + 63) / 64;
    for (const auto& a : p.init) {
      if (!index_.contains(a)) statics_.insert(a);
    }
    ops_.reserve(actions.size());
    for (const auto& ga : actions) {
      Operator op{ga.ref(), {}, {}, {}};
      bool possible = true;
      for (const auto& a : ga.pre) {
        auto it = index_.find(a);
        if (it != index_.end()) {
          op.pre.push_back(it->second);
        } else if (!statics_.contains(a)) {
          possible = false;
        }
      }
      if (!possible) continue;
      for (const auto& a : ga.add) op.add.push_back(index_.at(a));
      for (const auto& a : ga.del) {
        // add wins over delete in (s \ del) ∪ add
        if (!ga.add.contains(a)) op.del.push_back(index_.at(a));
      }
      ops_.push_back(std::move(op));
    }
    achievers_of_pre_.resize(fluents_.size());
    for (std::uint32_t i = 0; i < ops_.size(); ++i) {
      for (auto f : ops_[i].pre) achievers_of_pre_[f].push_back(i);
    }
    init_ = pack(p.init);
  }

  std::size_t num_fluents() const { return fluents_.size(); }
  std::size_t words() const { return words_; }
  const std::vector<Operator>& ops() const { return ops_; }
  const AtomSet& statics() const { return statics_; }
  const PackedState& init() const { return init_; }
  /// Operators having fluent `f` in their precondition.
  const std::vector<std::uint32_t>& ops_requiring(std::uint32_t f) const { return achievers_of_pre_[f]; }

  /// Fluent indices of `goal`, or nullopt if a goal atom can never hold.
  std::optional<std::vector<std::uint32_t>> goal_fluents(const AtomSet& goal) const {
    std::vector<std::uint32_t> out;
    for (const auto& a : goal) {
      auto it = index_.find(a);
      if (it != index_.end()) {
        out.push_back(it->second);
      } else if (!statics_.contains(a)) {
        return std::nullopt;
      }
    }
    return out;
  }

  PackedState pack(const State& s) const {
    PackedState out(words_, 0);
    for (const auto& a : s) {
      auto it = index_.find(a);
      if (it != index_.end()) set(out, it->second);
    }
    return out;
  }

  State unpack(const PackedState& s) const {
    State out = statics_;
    for (std::uint32_t i = 0; i < fluents_.size(); ++i) {
      if (test(s, i)) out.insert(fluents_[i]);
    }
    return out;
  }

  static bool test(const PackedState& s, std::uint32_t f) { return (s[f >> 6] >> (f & 63)) & 1U; }
  static void set(PackedState& s, std::uint32_t f) { s[f >> 6] |= std::uint64_t{1} << (f & 63); }
  static void reset(PackedState& s, std::uint32_t f) { s[f >> 6] &= ~(std::uint64_t{1} << (f & 63)); }

  bool applicable(const PackedState& s, const Operator& op) const {
    for (auto f : op.pre) {
      if (!test(s, f)) return false;
    }
    return true;
  }

  PackedState successor(const PackedState& s, const Operator& op) const {
    PackedState out = s;
    for (auto f : op.del) reset(out, f);
    for (auto f : op.add) set(out, f);
    return out;
  }

  static bool holds(const PackedState& s, const std::vector<std::uint32_t>& goal) {
    for (auto f : goal) {
      if (!test(s, f)) return false;
    }
    return true;
  }

 private:
  void intern(const Atom& a) {
    if (index_.emplace(a, static_cast<std::uint32_t>(fluents_.size())).second) fluents_.push_back(a);
  }

  std::vector<Atom> fluents_;
  std::map<Atom, std::uint32_t> index_;
  AtomSet statics_;
  std::vector<Operator> ops_;
  std::vector<std::vector<std::uint32_t>> achievers_of_pre_;
  std::size_t words_ = 0;
  PackedState init_;
};

/// Additive delete-relaxation heuristic (unit action costs).
class AdditiveHeuristic {
 public:
  explicit AdditiveHeuristic(const GroundTask& task) : task_(task) {}

  Cost operator()(const PackedState& s, const std::vector<std::uint32_t>& goal) {
    const auto& ops = task_.ops();
    cost_.assign(task_.num_fluents(), kInfiniteCost);
    remaining_.resize(ops.size());
    op_sum_.assign(ops.size(), 0);
    queue_ = {};
    for (std::uint32_t f = 0; f < task_.num_fluents(); ++f) {
      if (GroundTask::test(s, f)) {
        cost_[f] = 0;
        queue_.emplace(0, f);
      }
    }
    for (std::uint32_t i = 0; i < ops.size(); ++i) {
      remaining_[i] = static_cast<std::uint32_t>(ops[i].pre.size());
      if (remaining_[i] == 0) fire(i);
    }
    while (!queue_.empty()) {
      auto [c, f] = queue_.top();
      queue_.pop();
      if (c > cost_[f]) continue;
      for (auto i : task_.ops_requiring(f)) {
        op_sum_[i] += c;
        if (--remaining_[i] == 0) fire(i);
      }
    }
    Cost h = 0;
    for (auto f : goal) {
      if (cost_[f] == kInfiniteCost) return kInfiniteCost;
      h += cost_[f];
    }
    return h;
  }

 private:
  void fire(std::uint32_t i) {
    Cost c = op_sum_[i] + 1;
    for (auto f : task_.ops()[i].add) {
      if (c < cost_[f]) {
        cost_[f] = c;
        queue_.emplace(c, f);
      }
    }
  }

  using Entry = std::pair<Cost, std::uint32_t>;
  const GroundTask& task_;
  std::vector<Cost> cost_;
  std::vector<std::uint32_t> remaining_;
  std::vector<Cost> op_sum_;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
};

/// h_add(s, goal) over the given ground actions; kInfiniteCost if unreachable.
inline Cost h_add(const State& s, const AtomSet& goal, const std::vector<GroundAction>& actions) {
  Problem p;
  p.init = s;
  GroundTask task(p, actions);
  auto g = task.goal_fluents(goal);
  if (!g) return kInfiniteCost;
  AdditiveHeuristic h(task);
  return h(task.pack(s), *g);
}

struct SearchLimits {
  std::size_t max_expansions = 1'000'000;
  std::optional<double> timeout_seconds;
};

struct SearchStats {
  std::size_t expanded = 0;
  std::size_t generated = 0;
  double seconds = 0.0;
};

struct SearchResult {
  enum class Outcome { Plan, ProvedNoPlan, ProvedNoPlanWithinBound, ResourceLimit };
  Outcome outcome = Outcome::ResourceLimit;
  Plan plan;
  std::size_t cost = 0;
  std::optional<std::size_t> bound;
  SearchStats stats;

  bool solved() const { return outcome == Outcome::Plan; }
};

inline std::string_view to_string(SearchResult::Outcome o) {
  switch (o) {
    case SearchResult::Outcome::Plan: return "Plan";
    case SearchResult::Outcome::ProvedNoPlan: return "ProvedNoPlan";
    case SearchResult::Outcome::ProvedNoPlanWithinBound: return "ProvedNoPlanWithinBound";
    case SearchResult::Outcome::ResourceLimit: return "ResourceLimit";
  }
  return "?";
}

inline nlohmann::json to_json(const SearchResult& r) {
  nlohmann::json j;
  j["outcome"] = std::string(to_string(r.outcome));
  if (r.solved()) j["cost"] = r.cost;
  if (r.bound) j["bound"] = *r.bound;
  j["statistics"] = {{"expanded", r.stats.expanded}, {"generated", r.stats.generated}, {"seconds", r.stats.seconds}};
  return j;
}

namespace detail {

/// Interned packed states with parent pointers for plan extraction.
class SearchSpace {
 public:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  explicit SearchSpace(std::size_t words)
      : words_(words), set_(1024, Hasher{this}, Equal{this}) {}

  /// Returns (node id, inserted).
  std::pair<std::uint32_t, bool> insert(const PackedState& s, std::uint32_t parent, std::uint32_t op, std::uint32_t g) {
    const auto id = static_cast<std::uint32_t>(parent_.size());
    data_.insert(data_.end(), s.begin(), s.end());
    parent_.push_back(parent);
    op_.push_back(op);
    g_.push_back(g);
    auto [it, inserted] = set_.insert(id);
    if (!inserted) {
      data_.resize(data_.size() - words_);
      parent_.pop_back();
      op_.pop_back();
      g_.pop_back();
      return {*it, false};
    }
    return {id, true};
  }

  PackedState state(std::uint32_t id) const {
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(id * words_);
    return PackedState(first, first + static_cast<std::ptrdiff_t>(words_));
  }
  std::uint32_t g(std::uint32_t id) const { return g_[id]; }
  std::size_t size() const { return parent_.size(); }

  Plan extract(std::uint32_t id, const GroundTask& task) const {
    Plan plan;
    while (parent_[id] != kNone) {
      plan.push_back(task.ops()[op_[id]].ref);
      id = parent_[id];
    }
    return {plan.rbegin(), plan.rend()};
  }

 private:
  struct Hasher {
    const SearchSpace* self;
    std::size_t operator()(std::uint32_t id) const {
      std::uint64_t h = 0x9E3779B97F4A7C15ULL;
      const std::uint64_t* w = self->data_.data() + static_cast<std::size_t>(id) * self->words_;
      for (std::size_t i = 0; i < self->words_; ++i) {
        h ^= w[i] + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };
  struct Equal {
    const SearchSpace* self;
    bool operator()(std::uint32_t a, std::uint32_t b) const {
      const std::uint64_t* x = self->data_.data() + static_cast<std::size_t>(a) * self->words_;
      const std::uint64_t* y = self->data_.data() + static_cast<std::size_t>(b) * self->words_;
      return std::equal(x, x + self->words_, y);
    }
  };

  std::size_t words_;
  std::vector<std::uint64_t> data_;
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> op_;
  std::vector<std::uint32_t> g_;
  std::unordered_set<std::uint32_t, Hasher, Equal> set_;
};

class Clock {
 public:
  explicit Clock(std::optional<double> timeout) : start_(std::chrono::steady_clock::now()), timeout_(timeout) {}
  double elapsed() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }
  bool expired() const { return timeout_ && elapsed() > *timeout_; }

 private:
  std::chrono::steady_clock::time_point start_;
  std::optional<double> timeout_;
};

}  // namespace detail

/// Greedy best-first search from `start`, ordered by (h_add, insertion order).
/// States with infinite h_add are pruned; exhausting the open list proves no plan.
inline SearchResult plan_gbfs(const GroundTask& task, const PackedState& start, const AtomSet& goal,
                              const SearchLimits& limits = {}) {
  using Outcome = SearchResult::Outcome;
  SearchResult r;
  detail::Clock clock(limits.timeout_seconds);
  auto goal_fluents = task.goal_fluents(goal);
  if (!goal_fluents) {
    r.outcome = Outcome::ProvedNoPlan;
    r.stats.seconds = clock.elapsed();
    return r;
  }
  AdditiveHeuristic h(task);
  detail::SearchSpace space(task.words());
  auto [root, _] = space.insert(start, detail::SearchSpace::kNone, 0, 0);
  r.stats.generated = 1;
  if (GroundTask::holds(start, *goal_fluents)) {
    r.outcome = Outcome::Plan;
    r.stats.seconds = clock.elapsed();
    return r;
  }
  using Entry = std::tuple<Cost, std::uint64_t, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t seq = 0;
  Cost h0 = h(start, *goal_fluents);
  if (h0 != kInfiniteCost) open.emplace(h0, seq++, root);

  while (!open.empty()) {
    if (r.stats.expanded >= limits.max_expansions || clock.expired()) {
      r.outcome = Outcome::ResourceLimit;
      r.stats.seconds = clock.elapsed();
      return r;
    }
    auto [hv, order, id] = open.top();
    open.pop();
    ++r.stats.expanded;
    const PackedState s = space.state(id);
    for (std::uint32_t i = 0; i < task.ops().size(); ++i) {
      const auto& op = task.ops()[i];
      if (!task.applicable(s, op)) continue;
      PackedState next = task.successor(s, op);
      auto [child, inserted] = space.insert(next, id, i, space.g(id) + 1);
      if (!inserted) continue;
      ++r.stats.generated;
      if (GroundTask::holds(next, *goal_fluents)) {
        r.outcome = Outcome::Plan;
        r.plan = space.extract(child, task);
        r.cost = r.plan.size();
        r.stats.seconds = clock.elapsed();
        return r;
      }
      Cost hc = h(next, *goal_fluents);
      if (hc != kInfiniteCost) open.emplace(hc, seq++, child);
    }
  }
  r.outcome = Outcome::ProvedNoPlan;
  r.stats.seconds = clock.elapsed();
  return r;
}

/// Breadth-first search from `start`. With a bound, only plans of length
/// <= bound are considered.
inline SearchResult plan_optimal(const GroundTask& task, const PackedState& start, const AtomSet& goal,
                                 std::optional<std::size_t> bound = std::nullopt, const SearchLimits& limits = {}) {
  using Outcome = SearchResult::Outcome;
  SearchResult r;
  r.bound = bound;
  detail::Clock clock(limits.timeout_seconds);
  auto goal_fluents = task.goal_fluents(goal);
  if (!goal_fluents) {
    r.outcome = Outcome::ProvedNoPlan;
    r.stats.seconds = clock.elapsed();
    return r;
  }
  detail::SearchSpace space(task.words());
  auto [root, _] = space.insert(start, detail::SearchSpace::kNone, 0, 0);
  r.stats.generated = 1;
  if (GroundTask::holds(start, *goal_fluents)) {
    r.outcome = Outcome::Plan;
    r.stats.seconds = clock.elapsed();
    return r;
  }
  std::deque<std::uint32_t> open{root};
  bool cut_by_bound = false;
  while (!open.empty()) {
    if (r.stats.expanded >= limits.max_expansions || clock.expired()) {
      r.outcome = Outcome::ResourceLimit;
      r.stats.seconds = clock.elapsed();
      return r;
    }
    std::uint32_t id = open.front();
    open.pop_front();
    if (bound && space.g(id) >= *bound) {
      cut_by_bound = true;
      continue;
    }
    ++r.stats.expanded;
    const PackedState s = space.state(id);
    for (std::uint32_t i = 0; i < task.ops().size(); ++i) {
      const auto& op = task.ops()[i];
      if (!task.applicable(s, op)) continue;
      auto [child, inserted] = space.insert(task.successor(s, op), id, i, space.g(id) + 1);
      if (!inserted) continue;
      ++r.stats.generated;
      if (GroundTask::holds(space.state(child), *goal_fluents)) {
        r.outcome = Outcome::Plan;
        r.plan = space.extract(child, task);
        r.cost = r.plan.size();
        r.stats.seconds = clock.elapsed();
        return r;
      }
      open.push_back(child);
    }
  }
  r.outcome = cut_by_bound ? Outcome::ProvedNoPlanWithinBound : Outcome::ProvedNoPlan;
  r.stats.seconds = clock.elapsed();
  return r;
}

namespace detail {

inline void assert_valid(const Domain& d, const Problem& p, const SearchResult& r) {
  if (!r.solved()) return;
  if (!validate_plan(d, p, r.plan).valid) throw std::logic_error("planner produced an invalid plan");
}

}  // namespace detail

inline SearchResult plan_gbfs(const Domain& d, const Problem& p, const SearchLimits& limits = {}) {
  check_problem(d, p);
  GroundTask task(d, p);
  SearchResult r = plan_gbfs(task, task.init(), p.goal, limits);
  detail::assert_valid(d, p, r);
  return r;
}

inline SearchResult plan_optimal(const Domain& d, const Problem& p, std::optional<std::size_t> bound = std::nullopt,
                                 const SearchLimits& limits = {}) {
  check_problem(d, p);
  GroundTask task(d, p);
  SearchResult r = plan_optimal(task, task.init(), p.goal, bound, limits);
  detail::assert_valid(d, p, r);
  return r;
}

struct RandomWalk {
  State state;
  Plan actions;
};

/// Applies up to `steps` uniformly chosen applicable actions; stops early in
/// a state with none.
inline RandomWalk random_walk(const GroundTask& task, const PackedState& start, std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PackedState s = start;
  RandomWalk out;
  std::vector<std::uint32_t> choices;
  for (std::size_t k = 0; k < steps; ++k) {
    choices.clear();
    for (std::uint32_t i = 0; i < task.ops().size(); ++i) {
      if (task.applicable(s, task.ops()[i])) choices.push_back(i);
    }
    if (choices.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    const auto& op = task.ops()[choices[pick(rng)]];
    s = task.successor(s, op);
    out.actions.push_back(op.ref);
  }
  out.state = task.unpack(s);
  return out;
}

inline RandomWalk random_walk(const Domain& d, const Problem& p, std::size_t steps, std::uint64_t seed) {
  GroundTask task(d, p);
  return random_walk(task, task.init(), steps, seed);
}

}  // namespace gtp
