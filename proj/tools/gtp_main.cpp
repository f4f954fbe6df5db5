// gtp: command-line front end for the game-testing pipeline.
//
// Exit codes: 0 success, 1 negative verdict (inconsistent, no plan, dead ends
// found, shortcut found, execution diverged), 2 input or usage error,
// 3 search gave up on a resource limit.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gtp/gtp.hpp"
#include "play_server.hpp"

namespace fs = std::filesystem;
using namespace gtp;

namespace {

constexpr int kOk = 0;
constexpr int kNegative = 1;
constexpr int kInputError = 2;
constexpr int kResourceLimit = 3;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("cannot write " + path);
  out << text;
}

void emit_json(const std::optional<std::string>& path, const nlohmann::json& j) {
  if (path) {
    spit(*path, j.dump(2) + "\n");
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

Domain load_domain(const std::string& path) {
  try {
    return parse_domain(slurp(path));
  } catch (const ParseError& e) {
    throw CliError(path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.what());
  }
}

Problem load_problem(const std::string& path) {
  try {
    return parse_problem(slurp(path));
  } catch (const ParseError& e) {
    throw CliError(path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.what());
  }
}

Plan load_plan(const std::string& path) {
  try {
    return parse_plan(slurp(path));
  } catch (const ParseError& e) {
    throw CliError(path + ":" + std::to_string(e.line()) + ": " + e.what());
  }
}

struct Corpus {
  std::vector<Trace> traces;
  std::vector<std::string> ids;
};

// Every *.gtrace / *.jsonl file directly in `dir`, in name order.
Corpus load_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw CliError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".gtrace" || ext == ".jsonl")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Corpus c;
  for (const auto& f : files) {
    try {
      Trace t = read_trace_file(f.string());
      auto wf = check_wellformed(t);
      if (!wf.ok()) {
        const auto& first = wf.findings.front();
        throw CliError(f.string() + ": malformed trace (" + std::string(to_string(first.kind)) + "): " + first.message);
      }
      c.traces.push_back(std::move(t));
      c.ids.push_back(f.filename().string());
    } catch (const FormatError& e) {
      throw CliError(f.string() + ":" + std::to_string(e.line()) + ": " + e.what());
    } catch (const VersionError& e) {
      throw CliError(f.string() + ": " + e.what());
    } catch (const InconsistentStep& e) {
      throw CliError(f.string() + ": step " + std::to_string(e.step()) + ": " + e.what());
    }
  }
  spdlog::info("loaded {} traces from {}", c.traces.size(), dir);
  return c;
}

SearchLimits limits_from(std::size_t max_nodes, std::optional<double> timeout) {
  SearchLimits l;
  l.max_expansions = max_nodes;
  l.timeout_seconds = timeout;
  return l;
}

std::vector<rpg::Direction> load_script(const std::string& path) {
  std::vector<rpg::Direction> out;
  std::istringstream in(slurp(path));
  std::string word;
  while (in >> word) {
    auto d = rpg::parse_direction(word);
    if (!d) throw CliError(path + ": unknown command '" + word + "' (expected up/down/left/right)");
    out.push_back(*d);
  }
  return out;
}

AtomSet goal_for(const rpg::GameMap& m, const std::string& quest) {
  if (quest == "all") return rpg::all_quests_done(m);
  if (m.quest_index(quest) == m.quests.size()) throw CliError("unknown quest " + quest);
  return {Atom{"quest-done", {quest}}};
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("gtp");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("GTP_LOG_LEVEL")) {
    const std::string v = env;
    if (v == "error" || v == "warn" || v == "info" || v == "debug") {
      spdlog::set_level(spdlog::level::from_str(v));
    } else {
      spdlog::warn("ignoring GTP_LOG_LEVEL={} (expected error|warn|info|debug)", v);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Planning-based game testing: learn, check, plan, generate scenarios, simulate"};
  app.require_subcommand(1);

  // learn
  auto* learn = app.add_subcommand("learn", "Learn a STRIPS domain from gtrace-1 logs");
  std::string traces_dir, out_file, report_file, domain_name = "rpg";
  learn->add_option("--traces", traces_dir, "Directory of *.gtrace files")->required();
  learn->add_option("--out", out_file, "Domain PDDL output")->required();
  learn->add_option("--report", report_file, "Learn report JSON output")->required();
  learn->add_option("--name", domain_name, "Domain name");

  // check
  auto* check = app.add_subcommand("check", "Check a domain against gtrace-1 logs");
  std::string domain_file;
  std::optional<std::string> json_out;
  check->add_option("--domain", domain_file)->required();
  check->add_option("--traces", traces_dir)->required();
  check->add_option("--report", json_out, "Write the JSON report here instead of stdout");

  // plan
  auto* plan = app.add_subcommand("plan", "Solve a problem");
  std::string problem_file;
  bool optimal = false;
  std::optional<std::size_t> bound;
  std::size_t max_nodes = 1'000'000;
  std::optional<double> timeout;
  plan->add_option("--domain", domain_file)->required();
  plan->add_option("--problem", problem_file)->required();
  plan->add_option("--out", out_file, "Plan output")->required();
  plan->add_flag("--optimal", optimal, "Breadth-first search for a shortest plan");
  plan->add_option("--bound", bound, "Maximum plan length (with --optimal)");
  plan->add_option("--max-nodes", max_nodes, "Expansion limit");
  plan->add_option("--timeout", timeout, "Wall-clock limit in seconds");
  plan->add_option("--report", json_out, "Search statistics JSON");

  // scenarios
  auto* scenarios = app.add_subcommand("scenarios", "Instantiate goal templates into problems");
  std::string template_file, out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t walk = 0;
  scenarios->add_option("--domain", domain_file)->required();
  scenarios->add_option("--problem", problem_file, "Base problem (objects and initial state)")->required();
  scenarios->add_option("--template", template_file)->required();
  scenarios->add_option("--out", out_dir, "Output directory")->required();
  scenarios->add_option("--walk", walk, "Start from a random walk of this many steps (needs --seed)");
  scenarios->add_option("--seed", seed);

  // deadends
  auto* deadends = app.add_subcommand("deadends", "Search for dead ends from random reachable states");
  std::size_t samples = 50;
  std::string mode = "complete";
  deadends->add_option("--domain", domain_file)->required();
  deadends->add_option("--problem", problem_file)->required();
  deadends->add_option("--samples", samples);
  deadends->add_option("--walk", walk)->required();
  deadends->add_option("--seed", seed)->required();
  deadends->add_option("--mode", mode, "complete|optimal")->check(CLI::IsMember({"complete", "optimal"}));
  deadends->add_option("--max-nodes", max_nodes);
  deadends->add_option("--timeout", timeout, "Per-sample limit in seconds");
  deadends->add_option("--report", json_out);

  // shortcut
  auto* shortcut = app.add_subcommand("shortcut", "Prove that the goal needs at least --bound actions");
  shortcut->add_option("--domain", domain_file)->required();
  shortcut->add_option("--problem", problem_file)->required();
  shortcut->add_option("--bound", bound, "Minimum plan length L")->required();
  shortcut->add_option("--max-nodes", max_nodes);
  shortcut->add_option("--timeout", timeout);
  shortcut->add_option("--report", json_out);

  // sim
  auto* sim = app.add_subcommand("sim", "RPG simulator");
  sim->require_subcommand(1);
  std::string map_file, trace_file, policy, script_file, plan_file, quest = "all";
  std::size_t steps = 0;
  auto* run = sim->add_subcommand("run", "Record a playthrough");
  run->add_option("--map", map_file)->required();
  auto* script_opt = run->add_option("--script", script_file, "Whitespace-separated up/down/left/right");
  auto* policy_opt = run->add_option("--policy", policy, "coverage|random")->check(CLI::IsMember({"coverage", "random"}));
  script_opt->excludes(policy_opt);
  run->add_option("--seed", seed);
  run->add_option("--steps", steps);
  run->add_option("--trace", trace_file, "gtrace-1 output")->required();

  auto* exec = sim->add_subcommand("exec", "Execute a plan as arrow-key commands");
  exec->add_option("--map", map_file)->required();
  exec->add_option("--plan", plan_file)->required();
  exec->add_option("--trace", trace_file, "Also record the execution as gtrace-1");
  exec->add_option("--report", json_out);

  auto* export_pddl = sim->add_subcommand("export-pddl", "Write the ground-truth problem for a map");
  export_pddl->add_option("--map", map_file)->required();
  export_pddl->add_option("--out", out_file)->required();
  export_pddl->add_option("--goal", quest, "Quest id, or 'all'");

  // play
  auto* play = app.add_subcommand("play", "Serve the play UI and record traces");
  unsigned short port = 8080;
  std::optional<std::string> ui_dir;
  play->add_option("--map", map_file)->required();
  play->add_option("--port", port);
  play->add_option("--trace-dir", out_dir)->required();
  play->add_option("--ui-dir", ui_dir, "Directory with the UI bundle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*learn) {
      Corpus c = load_corpus(traces_dir);
      LearnResult r = learn_domain(c.traces, domain_name, c.ids);
      for (const auto& w : r.report.warnings) spdlog::warn("{}", w);
      spit(out_file, print_domain(r.domain));
      spit(report_file, to_json(r.report).dump(2) + "\n");
      spdlog::info("learned {} action schemas", r.domain.actions.size());
      return kOk;
    }
    if (*check) {
      Domain d = load_domain(domain_file);
      Corpus c = load_corpus(traces_dir);
      ConsistencyReport r = check_consistency(d, c.traces, c.ids);
      emit_json(json_out, to_json(r));
      return r.consistent() ? kOk : kNegative;
    }
    if (*plan) {
      Domain d = load_domain(domain_file);
      Problem p = load_problem(problem_file);
      SearchLimits limits = limits_from(max_nodes, timeout);
      if (bound && !optimal) throw CliError("--bound requires --optimal");
      SearchResult r = optimal ? plan_optimal(d, p, bound, limits) : plan_gbfs(d, p, limits);
      if (json_out) emit_json(json_out, to_json(r));
      spdlog::info("{}: {} steps, {} expanded, {:.3f}s", to_string(r.outcome), r.plan.size(), r.stats.expanded, r.stats.seconds);
      if (r.solved()) {
        spit(out_file, print_plan(r.plan));
        return kOk;
      }
      std::cerr << to_string(r.outcome) << "\n";
      return r.outcome == SearchResult::Outcome::ResourceLimit ? kResourceLimit : kNegative;
    }
    if (*scenarios) {
      Domain d = load_domain(domain_file);
      Problem base = load_problem(problem_file);
      check_problem(d, base);
      GoalTemplate t = parse_goal_template(nlohmann::json::parse(slurp(template_file)));
      std::optional<StartState> start;
      if (walk > 0) {
        if (!seed) throw CliError("--walk needs --seed");
        RandomWalk w = random_walk(d, base, walk, *seed);
        start = StartState{w.state, *seed, walk};
      }
      ScenarioBatch batch = instantiate_templates(d, base, t, start);
      write_batch(batch, out_dir);
      std::cout << batch.problems.size() << " problems written to " << out_dir << "\n";
      return kOk;
    }
    if (*deadends) {
      Domain d = load_domain(domain_file);
      Problem p = load_problem(problem_file);
      auto m = mode == "optimal" ? DeadEndSearch::Optimal : DeadEndSearch::Complete;
      DeadEndReport r = dead_end_scan(d, p, p.goal, samples, walk, *seed, limits_from(max_nodes, timeout), m);
      emit_json(json_out, to_json(r));
      return r.count(DeadEndVerdict::DeadEnd) > 0 ? kNegative : kOk;
    }
    if (*shortcut) {
      Domain d = load_domain(domain_file);
      Problem p = load_problem(problem_file);
      ShortcutReport r = shortcut_check(d, p, *bound, limits_from(max_nodes, timeout));
      emit_json(json_out, to_json(r));
      switch (r.verdict) {
        case ShortcutVerdict::NoShortcut: return kOk;
        case ShortcutVerdict::ShortcutFound: return kNegative;
        default: return kResourceLimit;
      }
    }
    if (*sim) {
      rpg::GameMap m = rpg::load_map_file(map_file);
      if (*run) {
        Trace t;
        if (!script_file.empty()) {
          t = rpg::record_session(m, load_script(script_file));
        } else if (policy == "coverage") {
          t = rpg::scripted_playthrough(m, rpg::CoveragePolicy{});
        } else if (policy == "random") {
          if (!seed) throw CliError("--policy random needs --seed");
          if (steps == 0) throw CliError("--policy random needs --steps");
          t = rpg::scripted_playthrough(m, rpg::RandomPolicy{*seed, steps});
        } else {
          throw CliError("sim run needs --script or --policy");
        }
        spit(trace_file, write_trace(t));
        spdlog::info("recorded {} steps to {}", t.steps.size(), trace_file);
        return kOk;
      }
      if (*exec) {
        Plan pl = load_plan(plan_file);
        rpg::ExecutionReport r = rpg::execute_plan(m, pl);
        if (!trace_file.empty()) {
          rpg::Session s(m);
          for (const auto& a : pl) {
            if (a.name == "move") s.command(*rpg::direction_between(*rpg::parse_tile_name(a.args[1]), *rpg::parse_tile_name(a.args[2])));
          }
          spit(trace_file, write_trace(s.trace()));
        }
        emit_json(json_out, to_json(m, r));
        return r.success ? kOk : kNegative;
      }
      if (*export_pddl) {
        spit(out_file, print_problem(rpg::to_problem(m, goal_for(m, quest))));
        return kOk;
      }
    }
    if (*play) {
      rpg::GameMap m = rpg::load_map_file(map_file);
      play::SessionService service(m, out_dir);
      std::optional<fs::path> ui;
      if (ui_dir) ui = fs::path(*ui_dir);
      play::PlayServer server(service, ui);
      try {
        server.bind(port);
      } catch (const boost::system::system_error& e) {
        std::cerr << "error: cannot listen on port " << port << ": " << e.what() << "\n";
        return kInputError;
      }
      std::cout << "serving http://127.0.0.1:" << server.port() << "/" << std::endl;
      server.run();
      for (const auto& path : service.flush()) std::cout << "flushed " << path << "\n";
      std::cout.flush();
      spdlog::shutdown();
      std::_Exit(kOk);
    }
  } catch (const LearnError& e) {
    std::cerr << "error: " << LearnError::name(e.kind()) << ": " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}
