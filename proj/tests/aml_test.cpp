#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"

using namespace gtp;
using namespace testing_support;

namespace {

ObservedInstance instance(ActionRef a, State pre, State post, std::size_t step = 0) {
  return ObservedInstance{std::move(a), std::move(pre), std::move(post), "t", step};
}

const std::map<std::string, std::string> kTypes{{"hero", "hero"}, {"t1", "tile"}, {"t2", "tile"}, {"t3", "tile"},
                                                 {"q1", "quest"}, {"a", "thing"},  {"b", "thing"}};

Trace coverage() { return rpg::scripted_playthrough(load("demo.json"), rpg::CoveragePolicy{}); }

std::vector<Trace> random_corpus(std::uint64_t seed, std::size_t n, std::size_t max_steps) {
  auto m = load("demo.json");
  std::mt19937_64 rng(seed);
  std::vector<Trace> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rpg::scripted_playthrough(m, rpg::RandomPolicy{rng(), rng() % (max_steps + 1)}));
  return out;
}

}  // namespace

TEST(LiftInstance, MoveKeepsOnlyArgumentAtoms) {
  State pre{{"at", {"hero", "t1"}}, {"neighbours", {"t1", "t2"}}, {"quest-ready", {"q1"}}};
  State post{{"at", {"hero", "t2"}}, {"neighbours", {"t1", "t2"}}, {"quest-ready", {"q1"}}};
  auto c = lift_instance(instance({"move", {"hero", "t1", "t2"}}, pre, post), kTypes);
  EXPECT_EQ(c.add, (AtomSet{{"at", {"?p0", "?p2"}}}));
  EXPECT_EQ(c.del, (AtomSet{{"at", {"?p0", "?p1"}}}));
  EXPECT_EQ(c.pre, (AtomSet{{"at", {"?p0", "?p1"}}, {"neighbours", {"?p1", "?p2"}}}));
  EXPECT_EQ(c.params[0].type, "hero");
  EXPECT_EQ(c.params[2].type, "tile");
  EXPECT_TRUE(c.unliftable.empty());
}

TEST(LiftInstance, NoEffect) {
  State s{{"at", {"hero", "t1"}}};
  auto c = lift_instance(instance({"wait", {"hero"}}, s, s), kTypes);
  EXPECT_TRUE(c.add.empty());
  EXPECT_TRUE(c.del.empty());
  EXPECT_TRUE(c.pre.empty());  // t1 is not an argument
}

TEST(LiftInstance, StartQuestMatchesSimulator) {
  auto m = load("demo.json");
  Trace t = rpg::record_session(m, {rpg::Direction::Right});
  ASSERT_EQ(t.steps.size(), 2u);
  ASSERT_EQ(t.steps[1].action.name, "start-quest");
  auto states = reconstruct_states(t);
  State pre = t.header.statics, post = t.header.statics;
  pre.insert(states[1].begin(), states[1].end());
  post.insert(states[2].begin(), states[2].end());
  auto c = lift_instance(instance(t.steps[1].action, pre, post), t.header.objects);
  EXPECT_EQ(c.add, (AtomSet{{"quest-active", {"?p1"}}}));
  EXPECT_EQ(c.del, (AtomSet{{"quest-ready", {"?p1"}}}));
  EXPECT_TRUE(c.pre.contains(Atom{"npc-near", {"?p2", "?p3"}}));
}

TEST(LiftInstance, UnliftableEffectIsRecorded) {
  State pre{{"at", {"hero", "t1"}}};
  State post{{"at", {"hero", "t1"}}, {"lit", {"t3"}}};
  auto c = lift_instance(instance({"wave", {"hero", "t1"}}, pre, post), kTypes);
  EXPECT_TRUE(c.add.empty());
  EXPECT_EQ(c.unliftable, (AtomSet{{"lit", {"t3"}}}));
}

TEST(LiftInstance, RepeatedArgumentsProduceEveryLifting) {
  State pre{{"p", {"a"}}};
  State post{{"p", {"a"}}, {"q", {"a"}}};
  auto c = lift_instance(instance({"act", {"a", "a"}}, pre, post), kTypes);
  EXPECT_EQ(c.pre, (AtomSet{{"p", {"?p0"}}, {"p", {"?p1"}}}));
  EXPECT_EQ(c.add, (AtomSet{{"q", {"?p0"}}, {"q", {"?p1"}}}));
}

TEST(MergeCandidates, SingleCandidateUnchanged) {
  State pre{{"at", {"hero", "t1"}}, {"neighbours", {"t1", "t2"}}};
  State post{{"at", {"hero", "t2"}}, {"neighbours", {"t1", "t2"}}};
  auto c = lift_instance(instance({"move", {"hero", "t1", "t2"}}, pre, post), kTypes);
  auto r = merge_candidates({c});
  EXPECT_EQ(r.schema.pre, c.pre);
  EXPECT_EQ(r.schema.add, c.add);
  EXPECT_EQ(r.schema.del, c.del);
  EXPECT_TRUE(r.dropped_preconditions.empty());
}

TEST(MergeCandidates, SpuriousPreconditionDropsOut) {
  auto c1 = lift_instance(instance({"move", {"hero", "t1", "t2"}},
                                   {{"at", {"hero", "t1"}}, {"neighbours", {"t1", "t2"}}, {"lit", {"t2"}}},
                                   {{"at", {"hero", "t2"}}, {"neighbours", {"t1", "t2"}}, {"lit", {"t2"}}}),
                          kTypes);
  auto c2 = lift_instance(instance({"move", {"hero", "t2", "t3"}}, {{"at", {"hero", "t2"}}, {"neighbours", {"t2", "t3"}}},
                                   {{"at", {"hero", "t3"}}, {"neighbours", {"t2", "t3"}}}, 1),
                          kTypes);
  EXPECT_TRUE(c1.pre.contains(Atom{"lit", {"?p2"}}));
  auto r = merge_candidates({c1, c2});
  EXPECT_EQ(r.schema.pre, (AtomSet{{"at", {"?p0", "?p1"}}, {"neighbours", {"?p1", "?p2"}}}));
  EXPECT_EQ(r.dropped_preconditions, std::vector<std::size_t>{1});
}

TEST(MergeCandidates, DifferingEffectsConflict) {
  auto c1 = lift_instance(instance({"act", {"a"}}, {}, {{"p", {"a"}}}), kTypes);
  auto c2 = lift_instance(instance({"act", {"b"}}, {}, {}, 1), kTypes);
  try {
    merge_candidates({c1, c2});
    FAIL();
  } catch (const LearnError& e) {
    EXPECT_EQ(e.kind(), LearnError::Kind::EffectConflict);
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
  }
}

TEST(MergeCandidates, ArityAndTypeConflicts) {
  auto c1 = lift_instance(instance({"act", {"a"}}, {}, {}), kTypes);
  auto c2 = lift_instance(instance({"act", {"a", "b"}}, {}, {}, 1), kTypes);
  auto c3 = lift_instance(instance({"act", {"t1"}}, {}, {}, 2), kTypes);
  try {
    merge_candidates({c1, c2});
    FAIL();
  } catch (const LearnError& e) {
    EXPECT_EQ(e.kind(), LearnError::Kind::ArityMismatch);
  }
  try {
    merge_candidates({c1, c3});
    FAIL();
  } catch (const LearnError& e) {
    EXPECT_EQ(e.kind(), LearnError::Kind::TypeConflict);
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
  }
}

TEST(MergeCandidates, AliasedArgumentsResolvedByLaterObservation) {
  // act(a,a) then act(a,b): only q(?p1) is added in both.
  auto c1 = lift_instance(instance({"act", {"a", "a"}}, {}, {{"q", {"a"}}}), kTypes);
  auto c2 = lift_instance(instance({"act", {"a", "b"}}, {}, {{"q", {"b"}}}, 1), kTypes);
  auto r = merge_candidates({c1, c2});
  EXPECT_EQ(r.schema.add, (AtomSet{{"q", {"?p1"}}}));
}

TEST(LearnDomain, CoverageYieldsTheFourActions) {
  auto r = learn_domain({coverage()}, "rpg");
  std::set<std::string> names;
  for (const auto& [n, a] : r.domain.actions) names.insert(n);
  EXPECT_EQ(names, (std::set<std::string>{"complete-quest", "move", "pick-up-item", "start-quest"}));
  EXPECT_TRUE(r.report.warnings.empty());
  EXPECT_EQ(r.report.actions.at("pick-up-item").instances, 13u);
  EXPECT_TRUE(r.domain.predicates.contains("neighbours"));
  EXPECT_EQ(r.domain.predicates.at("at").params[1].type, "tile");
}

TEST(LearnDomain, OneStepIsMaximallySpecific) {
  auto m = load("small.json");
  Trace t = rpg::record_session(m, {rpg::Direction::Down});
  ASSERT_EQ(t.steps.size(), 1u);
  auto r = learn_domain({t}, "rpg");
  State pre = t.header.statics;
  auto states = reconstruct_states(t);
  pre.insert(states[0].begin(), states[0].end());
  AtomSet expected;
  for (const auto& a : pre) {
    std::unordered_map<std::string, std::string> inv{{"hero", "?p0"}, {"t1-1", "?p1"}, {"t2-1", "?p2"}};
    bool liftable = std::all_of(a.args.begin(), a.args.end(), [&](const std::string& o) { return inv.contains(o); });
    if (liftable) expected.insert(substitute(a, inv));
  }
  EXPECT_EQ(r.domain.actions.at("move").pre, expected);
  EXPECT_TRUE(expected.contains(Atom{"neighbours", {"?p2", "?p1"}}));
}

TEST(LearnDomain, EmptyInput) {
  auto m = load("demo.json");
  try {
    learn_domain({rpg::record_session(m, {})}, "rpg");
    FAIL();
  } catch (const LearnError& e) {
    EXPECT_EQ(e.kind(), LearnError::Kind::EmptyInput);
  }
  EXPECT_THROW(learn_domain({}, "rpg"), LearnError);
}

TEST(LearnDomain, ObjectTypeConflictAcrossTraces) {
  Trace a = rpg::record_session(load("small.json"), {rpg::Direction::Down});
  Trace b = a;
  b.header.objects["hero"] = "tile";
  try {
    learn_domain({a, b}, "rpg");
    FAIL();
  } catch (const LearnError& e) {
    EXPECT_EQ(e.kind(), LearnError::Kind::TypeConflict);
  }
}

TEST(LearnDomain, UnliftableEffectWarns) {
  Trace t = read_trace_text(
      R"({"format":"gtrace-1","objects":{"hero":"hero","t1":"tile","t2":"tile"},"static":[],"init":[["at","hero","t1"]]})"
      "\n"
      R"({"step":0,"action":{"name":"wave","args":["hero"]},"delta":{"add":[["lit","t2"]],"del":[]}})"
      "\n");
  auto r = learn_domain({t}, "d");
  ASSERT_EQ(r.report.warnings.size(), 1u);
  EXPECT_NE(r.report.warnings[0].find("UnliftableEffect"), std::string::npos);
  EXPECT_TRUE(r.domain.actions.at("wave").add.empty());
}

TEST(LearnDomain, FullCorpusIsConsistent) {
  auto corpus = random_corpus(1, 5, 150);
  corpus.push_back(coverage());
  auto r = learn_domain(corpus, "rpg");
  EXPECT_TRUE(check_consistency(r.domain, corpus).consistent());
}

TEST(LearnProperty, SoundOnInputs) {
  auto corpus = random_corpus(2, 30, 150);
  corpus.push_back(coverage());
  Domain d = learn_domain(corpus, "rpg").domain;
  for (const auto& t : corpus) {
    auto states = reconstruct_states(t);
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      State pre = t.header.statics, post = t.header.statics;
      pre.insert(states[i].begin(), states[i].end());
      post.insert(states[i + 1].begin(), states[i + 1].end());
      GroundAction g = instantiate(*d.find_action(t.steps[i].action.name), t.steps[i].action.args);
      ASSERT_TRUE(std::includes(pre.begin(), pre.end(), g.pre.begin(), g.pre.end()));
      ASSERT_EQ(gtp::apply(pre, g), post);
    }
  }
}

TEST(LearnProperty, MoreTracesNeverEnlargePreconditions) {
  auto corpus = random_corpus(3, 12, 150);
  corpus.push_back(coverage());
  std::vector<Trace> prefix;
  std::optional<Domain> previous;
  for (const auto& t : corpus) {
    prefix.push_back(t);
    if (std::all_of(prefix.begin(), prefix.end(), [](const Trace& x) { return x.steps.empty(); })) continue;
    Domain d = learn_domain(prefix, "rpg").domain;
    if (previous) {
      for (const auto& [name, a] : previous->actions) {
        const auto& now = d.actions.at(name).pre;
        EXPECT_TRUE(std::includes(a.pre.begin(), a.pre.end(), now.begin(), now.end())) << name;
      }
    }
    previous = d;
  }
}

TEST(LearnProperty, OrderIndependent) {
  auto corpus = random_corpus(4, 8, 120);
  corpus.push_back(coverage());
  std::string reference = print_domain(learn_domain(corpus, "rpg").domain);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(corpus.begin(), corpus.end(), rng);
    EXPECT_EQ(print_domain(learn_domain(corpus, "rpg").domain), reference);
  }
}

TEST(Consistency, LearnedDomainOnItsTraces) {
  auto corpus = random_corpus(5, 4, 100);
  corpus.push_back(coverage());
  Domain d = learn_domain(corpus, "rpg").domain;
  auto r = check_consistency(d, corpus);
  EXPECT_TRUE(r.consistent());
  EXPECT_EQ(to_json(r)["verdict"], "CONSISTENT");
  std::size_t steps = 0;
  for (const auto& t : corpus) steps += t.steps.size();
  EXPECT_EQ(r.steps, steps);
}

TEST(Consistency, AddedPreconditionThatNeverHeld) {
  Trace t = coverage();
  Domain d = learn_domain({t}, "rpg").domain;
  d.actions.at("move").pre.insert({"at", {"?p0", "?p2"}});
  auto r = check_consistency(d, {t});
  ASSERT_FALSE(r.consistent());
  std::size_t first_move = 0;
  while (t.steps[first_move].action.name != "move") ++first_move;
  EXPECT_EQ(r.findings[0].kind, ConsistencyFinding::Kind::MissingPrecondition);
  EXPECT_EQ(r.findings[0].step, first_move);
}

TEST(Consistency, RemovedAddEffectFlagsEveryMove) {
  Trace t = coverage();
  Domain d = learn_domain({t}, "rpg").domain;
  d.actions.at("move").add.clear();
  auto r = check_consistency(d, {t});
  std::size_t moves = 0;
  for (const auto& s : t.steps) moves += s.action.name == "move";
  ASSERT_EQ(r.findings.size(), moves);
  for (const auto& f : r.findings) {
    EXPECT_EQ(f.kind, ConsistencyFinding::Kind::MissingAdd);
    EXPECT_EQ(t.steps[f.step].action.name, "move");
  }
  EXPECT_EQ(to_json(r)["summary"]["by_kind"]["MissingAdd"], moves);
}

TEST(Consistency, FrameViolationsAndUnknownActions) {
  Trace t = coverage();
  Domain d = learn_domain({t}, "rpg").domain;
  Domain extra = d;
  extra.actions.at("start-quest").add.insert({"quest-done", {"?p1"}});
  std::set<ConsistencyFinding::Kind> kinds;
  for (const auto& f : check_consistency(extra, {t}).findings) kinds.insert(f.kind);
  EXPECT_EQ(kinds, (std::set{ConsistencyFinding::Kind::UnexpectedAdd}));

  Domain no_del = d;
  no_del.actions.at("move").del.clear();
  kinds.clear();
  for (const auto& f : check_consistency(no_del, {t}).findings) kinds.insert(f.kind);
  EXPECT_EQ(kinds, (std::set{ConsistencyFinding::Kind::MissingDelete}));

  Domain wrong_del = d;
  wrong_del.actions.at("move").del.insert({"neighbours", {"?p1", "?p2"}});
  kinds.clear();
  for (const auto& f : check_consistency(wrong_del, {t}).findings) kinds.insert(f.kind);
  EXPECT_EQ(kinds, (std::set{ConsistencyFinding::Kind::UnexpectedDelete}));

  Domain missing = d;
  missing.actions.erase("start-quest");
  Domain narrow = d;
  narrow.actions.at("move").params.pop_back();
  auto r1 = check_consistency(missing, {t});
  EXPECT_EQ(std::count_if(r1.findings.begin(), r1.findings.end(),
                          [](const auto& f) { return f.kind == ConsistencyFinding::Kind::UnknownAction; }),
            2);
  auto r2 = check_consistency(narrow, {t});
  EXPECT_TRUE(std::all_of(r2.findings.begin(), r2.findings.end(),
                          [](const auto& f) { return f.kind == ConsistencyFinding::Kind::ArityMismatch; }));
}

TEST(Consistency, FindingsSortedAcrossTraces) {
  auto corpus = random_corpus(6, 4, 80);
  corpus.push_back(coverage());
  Domain d = learn_domain(corpus, "rpg").domain;
  d.actions.at("move").add.clear();
  d.actions.at("move").del.clear();
  auto r = check_consistency(d, corpus, {"b", "a", "d", "c", "e"});
  ASSERT_FALSE(r.findings.empty());
  EXPECT_TRUE(std::is_sorted(r.findings.begin(), r.findings.end(),
                             [](const auto& x, const auto& y) { return x.key() < y.key(); }));
}

TEST(ConsistencyProperty, ConsistentTracesValidateAsPlans) {
  auto corpus = random_corpus(7, 20, 120);
  corpus.push_back(coverage());
  Domain d = learn_domain(corpus, "rpg").domain;
  ASSERT_TRUE(check_consistency(d, corpus).consistent());
  for (const auto& t : corpus) {
    auto states = reconstruct_states(t);
    Problem p = problem_from_trace(t, "p", "rpg", states.back());
    Plan plan;
    for (const auto& s : t.steps) plan.push_back(s.action);
    EXPECT_TRUE(validate_plan(d, p, plan).valid);
  }
}
