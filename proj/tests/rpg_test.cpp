#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "gtp/play_session.hpp"
#include "support.hpp"

using namespace gtp;
using namespace testing_support;
using rpg::Direction;

namespace {

std::size_t count_action(const Trace& t, const std::string& name) {
  return static_cast<std::size_t>(
      std::count_if(t.steps.begin(), t.steps.end(), [&](const TraceStep& s) { return s.action.name == name; }));
}

Plan trace_plan(const Trace& t) {
  Plan p;
  for (const auto& s : t.steps) p.push_back(s.action);
  return p;
}

}  // namespace

TEST(LoadMap, SingleTile) {
  auto m = rpg::load_map_text(R"({"format":"gmap-1","grid":["."],"hero":{"start":[0,0]}})");
  EXPECT_EQ(m.walkable_tiles().size(), 1u);
  EXPECT_TRUE(m.adjacency().empty());
  auto [s, events] = rpg::step(m, rpg::initial_state(m), Direction::Up);
  EXPECT_TRUE(events.empty());
  EXPECT_EQ(s, rpg::initial_state(m));
}

TEST(LoadMap, Demo) {
  auto m = load("demo.json");
  EXPECT_EQ(m.quests.size(), 2u);
  EXPECT_EQ(m.items.size(), 13u);
  EXPECT_EQ(m.npcs.size(), 2u);
  EXPECT_EQ(m.max_count(), 10);
}

TEST(LoadMap, Errors) {
  EXPECT_THROW(rpg::load_map_text(R"({"format":"gmap-2","grid":["."],"hero":{"start":[0,0]}})"), MapError);
  EXPECT_THROW(rpg::load_map_text(R"({"format":"gmap-1","grid":["#"],"hero":{"start":[0,0]}})"), MapError);
  EXPECT_THROW(rpg::load_map_text(R"({"format":"gmap-1","grid":["..", "."],"hero":{"start":[0,0]}})"), MapError);
  try {
    rpg::load_map_text(R"({"format":"gmap-1","grid":["...."],"hero":{"start":[0,0]},
      "npcs":[{"id":"npc-a","tile":[0,3]}],
      "quests":[{"id":"q-a","giver":"npc-a","item_type":"gem","count":2}],
      "items":[{"id":"gem-1","type":"gem","quest":"q-a","tile":[0,2]}]})");
    FAIL();
  } catch (const MapError& e) {
    EXPECT_NE(std::string(e.what()).find("quests[0].count"), std::string::npos);
  }
}

TEST(Step, Examples) {
  auto m = load("small.json");
  auto s0 = rpg::initial_state(m);
  auto [blocked, none] = rpg::step(m, s0, Direction::Up);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(blocked, s0);

  auto [s1, e1] = rpg::step(m, s0, Direction::Right);
  ASSERT_EQ(e1.size(), 1u);
  EXPECT_EQ(e1[0].kind, rpg::GameEvent::Kind::Move);
  EXPECT_EQ(s1.hero, (rpg::Tile{1, 2}));

  auto [s2, e2] = rpg::step(m, s1, Direction::Right);
  ASSERT_EQ(e2.size(), 2u);
  EXPECT_EQ(e2[1].kind, rpg::GameEvent::Kind::StartQuest);
  EXPECT_EQ(s2.quests[0], rpg::QuestStatus::Active);
  for (auto st : s2.items) EXPECT_EQ(st, rpg::ItemStatus::OnTile);
}

TEST(Step, ItemsNeedActiveQuest) {
  auto m = load("small.json");
  // Straight down to apple-1 without meeting the farmer.
  auto t = rpg::record_session(m, {Direction::Down, Direction::Down, Direction::Down});
  EXPECT_EQ(count_action(t, "pick-up-item"), 0u);
  EXPECT_EQ(count_action(t, "move"), 3u);
}

TEST(Step, OneWayEdge) {
  auto m = load("trap.json");
  EXPECT_TRUE(m.adjacent({4, 3}, {5, 3}));
  EXPECT_FALSE(m.adjacent({5, 3}, {4, 3}));
}

TEST(RecordSession, Counts) {
  auto m = load("small.json");
  auto t = rpg::record_session(m, {Direction::Right, Direction::Right, Direction::Up, Direction::Left});
  EXPECT_EQ(count_action(t, "move"), 3u);
  EXPECT_EQ(count_action(t, "start-quest"), 1u);
  EXPECT_EQ(t.steps.size(), 4u);
  for (std::size_t i = 0; i < t.steps.size(); ++i) EXPECT_EQ(t.steps[i].index, i);
}

TEST(Policies, CoverageUsesAllActions) {
  for (const char* name : {"demo.json", "small.json"}) {
    auto m = load(name);
    Trace t = rpg::scripted_playthrough(m, rpg::CoveragePolicy{});
    for (const char* a : {"move", "pick-up-item", "start-quest", "complete-quest"}) {
      EXPECT_GT(count_action(t, a), 0u) << name << " " << a;
    }
    auto final_state = reconstruct_states(t).back();
    for (const auto& g : rpg::all_quests_done(m)) EXPECT_TRUE(final_state.contains(g)) << name;
  }
}

TEST(Policies, CoverageReportsTrappedHero) {
  // Walking the trap's one-way ledge first leaves the farmer unreachable.
  EXPECT_THROW(rpg::scripted_playthrough(load("trap.json"), rpg::CoveragePolicy{}), CoverageImpossible);
}

TEST(Policies, RandomIsSeeded) {
  auto m = load("demo.json");
  EXPECT_EQ(rpg::scripted_playthrough(m, rpg::RandomPolicy{5, 100}), rpg::scripted_playthrough(m, rpg::RandomPolicy{5, 100}));
  EXPECT_NE(rpg::scripted_playthrough(m, rpg::RandomPolicy{5, 100}), rpg::scripted_playthrough(m, rpg::RandomPolicy{6, 100}));
  EXPECT_TRUE(rpg::scripted_playthrough(m, rpg::RandomPolicy{5, 0}).steps.empty());
}

TEST(ExecutePlan, Empty) {
  auto m = load("demo.json");
  auto r = rpg::execute_plan(m, {});
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.final_state, rpg::initial_state(m));
}

TEST(ExecutePlan, MalformedPlans) {
  auto m = load("demo.json");
  EXPECT_THROW(rpg::execute_plan(m, {{"fly", {"hero"}}}), MalformedPlan);
  EXPECT_THROW(rpg::execute_plan(m, {{"move", {"hero", "t3-2"}}}), MalformedPlan);
  EXPECT_THROW(rpg::execute_plan(m, {{"move", {"hero", "t3-2", "t5-5"}}}), MalformedPlan);
}

TEST(ExecutePlan, DemoPlanSucceedsAndSwappedCompletionsDiverge) {
  auto m = load("demo.json");
  Domain ref = reference_domain();
  Problem p = rpg::to_problem(m, rpg::all_quests_done(m));
  auto r = plan_gbfs(ref, p);
  ASSERT_TRUE(r.solved());
  auto ok = rpg::execute_plan(m, r.plan);
  EXPECT_TRUE(ok.success);
  EXPECT_FALSE(ok.divergence_step.has_value());

  std::vector<std::size_t> completes;
  for (std::size_t i = 0; i < r.plan.size(); ++i) {
    if (r.plan[i].name == "complete-quest") completes.push_back(i);
  }
  ASSERT_EQ(completes.size(), 2u);
  Plan swapped = r.plan;
  std::swap(swapped[completes[0]], swapped[completes[1]]);
  auto bad = rpg::execute_plan(m, swapped);
  EXPECT_FALSE(bad.success);
  ASSERT_TRUE(bad.divergence_step.has_value());
  EXPECT_EQ(*bad.divergence_step, completes[0]);
}

TEST(ExecutePlan, BlockedMoveDiverges) {
  auto m = load("small.json");
  auto r = rpg::execute_plan(m, {{"move", {"hero", "t1-1", "t0-1"}}});
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.divergence_step, 0u);
}

TEST(Bisimulation, SimTracesReplayUnderReferenceDomain) {
  Domain ref = reference_domain();
  for (const char* name : {"demo.json", "small.json", "trap.json"}) {
    auto m = load(name);
    std::vector<Trace> traces;
    if (m.overrides.empty() || std::string(name) == "demo.json") traces.push_back(rpg::scripted_playthrough(m, rpg::CoveragePolicy{}));
    for (std::uint64_t seed = 0; seed < 30; ++seed) traces.push_back(rpg::scripted_playthrough(m, rpg::RandomPolicy{seed, 150}));
    for (const auto& t : traces) {
      Problem p = rpg::to_problem(m, {});
      auto v = validate_plan(ref, p, trace_plan(t));
      ASSERT_TRUE(v.valid) << name;
      auto states = reconstruct_states(t);
      State expected = t.header.statics;
      expected.insert(states.back().begin(), states.back().end());
      ASSERT_EQ(v.final_state, expected) << name;
      // Step-wise: every logged successor is exactly the domain successor.
      for (std::size_t i = 0; i < t.steps.size(); ++i) {
        State pre = t.header.statics;
        pre.insert(states[i].begin(), states[i].end());
        State post = t.header.statics;
        post.insert(states[i + 1].begin(), states[i + 1].end());
        ASSERT_EQ(gtp::apply(pre, resolve(ref, p, t.steps[i].action)), post) << name << " step " << i;
      }
    }
  }
}

TEST(QuestMonotonicity, StatusAndInventoryNeverDecrease) {
  auto m = load("demo.json");
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    rpg::Session s(m);
    for (int k = 0; k < 200; ++k) {
      auto before = s.state();
      s.command(rpg::kDirections[rng() % 4]);
      for (std::size_t q = 0; q < m.quests.size(); ++q) ASSERT_GE(s.state().quests[q], before.quests[q]);
      for (const auto& [type, n] : before.inventory) ASSERT_GE(s.state().inventory.at(type), n);
      for (std::size_t i = 0; i < m.items.size(); ++i) ASSERT_GE(s.state().items[i], before.items[i]);
    }
  }
}

TEST(PlaySession, Protocol) {
  auto dir = std::filesystem::temp_directory_path() / "gtp-play-session-test";
  std::filesystem::remove_all(dir);
  play::SessionService service(load("small.json"), dir);
  auto s = service.open();
  EXPECT_EQ(s->id(), "s1");
  auto snap = s->snapshot();
  EXPECT_EQ(snap["protocol"], "gplay-1");
  EXPECT_EQ(snap["type"], "snapshot");
  EXPECT_EQ(snap["map"]["rows"], 6);

  auto reply = nlohmann::json::parse(service.handle(*s, R"({"protocol":"gplay-1","command":"move","direction":"right"})"));
  EXPECT_EQ(reply["type"], "snapshot");
  EXPECT_EQ(reply["events"], nlohmann::json::array({"(move hero t1-1 t1-2)"}));
  EXPECT_EQ(reply["steps"], 1);

  reply = nlohmann::json::parse(service.handle(*s, R"({"protocol":"gplay-1","command":"move","direction":"right"})"));
  EXPECT_EQ(reply["events"].size(), 2u);
  EXPECT_EQ(reply["hud"][0]["status"], "active");

  EXPECT_EQ(nlohmann::json::parse(service.handle(*s, R"({"protocol":"gplay-0","command":"move"})"))["type"], "error");
  EXPECT_EQ(nlohmann::json::parse(service.handle(*s, "not json"))["type"], "error");
  EXPECT_EQ(nlohmann::json::parse(service.handle(*s, R"({"protocol":"gplay-1","command":"move","direction":"north"})"))["type"], "error");

  reply = nlohmann::json::parse(service.handle(*s, R"({"protocol":"gplay-1","command":"save-trace"})"));
  ASSERT_EQ(reply["type"], "saved");
  Trace saved = read_trace_file(reply["path"].get<std::string>());
  EXPECT_EQ(saved, s->trace());
  EXPECT_EQ(saved.steps.size(), 3u);

  auto other = service.open();
  EXPECT_EQ(other->id(), "s2");
  EXPECT_EQ(service.flush().size(), 1u);  // s2 has no steps yet
  reply = nlohmann::json::parse(service.handle(*s, R"({"protocol":"gplay-1","command":"reset"})"));
  EXPECT_EQ(reply["steps"], 0);
  service.close("s1");
  EXPECT_EQ(service.size(), 1u);
  std::filesystem::remove_all(dir);
}
