#pragma once

// gplay-1 session protocol for interactive play. Transport-agnostic: the
// server feeds text frames in and sends the returned frames out.
//
// client -> server  {"protocol":"gplay-1","command":"move","direction":"up"}
//                   {"protocol":"gplay-1","command":"reset"}
//                   {"protocol":"gplay-1","command":"save-trace"}
// server -> client  {"protocol":"gplay-1","type":"snapshot"|"saved"|"error", ...}
// Every accepted command is answered with a full, self-contained snapshot.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gtp/rpg_sim.hpp"
#include "gtp/trace.hpp"

namespace gtp::play {

inline constexpr std::string_view kProtocol = "gplay-1";

inline nlohmann::json map_json(const rpg::GameMap& m) {
  nlohmann::json j;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["grid"] = m.grid;
  j["npcs"] = nlohmann::json::array();
  for (const auto& n : m.npcs) j["npcs"].push_back({{"id", n.id}, {"tile", {n.tile.row, n.tile.col}}});
  j["one_way"] = nlohmann::json::array();
  for (const auto& o : m.overrides) {
    j["one_way"].push_back({{"from", {o.from.row, o.from.col}}, {"to", {o.to.row, o.to.col}}, {"kind", o.kind}});
  }
  return j;
}

inline nlohmann::json hud_json(const rpg::GameMap& m, const rpg::GameState& s) {
  nlohmann::json hud = nlohmann::json::array();
  for (std::size_t q = 0; q < m.quests.size(); ++q) {
    const auto& spec = m.quests[q];
    auto have = s.inventory.find(spec.item_type);
    hud.push_back({{"quest", spec.id},
                   {"giver", spec.giver},
                   {"status", std::string(rpg::to_string(s.quests[q]))},
                   {"item_type", spec.item_type},
                   {"have", have == s.inventory.end() ? 0 : have->second},
                   {"need", spec.count}});
  }
  return hud;
}

class PlaySession {
 public:
  PlaySession(std::string id, rpg::GameMap m) : id_(std::move(id)), session_(std::move(m)) {}

  const std::string& id() const { return id_; }
  const Trace& trace() const { return session_.trace(); }

  nlohmann::json snapshot(const std::vector<std::string>& events = {}) const {
    const auto& m = session_.map();
    nlohmann::json j;
    j["protocol"] = kProtocol;
    j["type"] = "snapshot";
    j["session"] = id_;
    j["map"] = map_json(m);
    j["state"] = rpg::to_json(m, session_.state());
    j["events"] = events;
    j["hud"] = hud_json(m, session_.state());
    j["steps"] = session_.trace().steps.size();
    return j;
  }

  static nlohmann::json error(std::string_view message) {
    return {{"protocol", kProtocol}, {"type", "error"}, {"message", message}};
  }

  /// Handles one client frame. `save` persists the current trace and returns
  /// the written path.
  template <typename Save>
  std::string handle(std::string_view frame, Save&& save) {
    std::lock_guard lock(mutex_);
    nlohmann::json msg = nlohmann::json::parse(frame, nullptr, false);
    if (msg.is_discarded() || !msg.is_object()) return error("message is not a JSON object").dump();
    if (msg.value("protocol", "") != kProtocol) {
      return error("unsupported protocol '" + msg.value("protocol", "") + "', expected gplay-1").dump();
    }
    const std::string command = msg.value("command", "");
    if (command == "move") {
      auto dir = rpg::parse_direction(msg.value("direction", ""));
      if (!dir) return error("move needs direction up|down|left|right").dump();
      const std::size_t before = session_.trace().steps.size();
      session_.command(*dir);
      std::vector<std::string> events;
      const auto& steps = session_.trace().steps;
      for (std::size_t i = before; i < steps.size(); ++i) events.push_back(to_string(steps[i].action));
      return snapshot(events).dump();
    }
    if (command == "reset") {
      session_.reset();
      return snapshot().dump();
    }
    if (command == "save-trace") {
      std::string path = save(*this);
      nlohmann::json j = snapshot();
      j["type"] = "saved";
      j["path"] = path;
      return j.dump();
    }
    return error("unknown command '" + command + "'").dump();
  }

 private:
  std::string id_;
  rpg::Session session_;
  mutable std::mutex mutex_;
};

/// Owns all live sessions and writes their traces to one directory, one file
/// per save, never shared between sessions.
class SessionService {
 public:
  SessionService(rpg::GameMap m, std::filesystem::path trace_dir) : map_(std::move(m)), dir_(std::move(trace_dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::shared_ptr<PlaySession> open() {
    std::lock_guard lock(mutex_);
    auto id = "s" + std::to_string(++next_id_);
    auto s = std::make_shared<PlaySession>(id, map_);
    sessions_[id] = s;
    return s;
  }

  void close(const std::string& id) {
    std::lock_guard lock(mutex_);
    sessions_.erase(id);
  }

  std::string handle(PlaySession& s, std::string_view frame) {
    return s.handle(frame, [this](const PlaySession& ps) { return save(ps); });
  }

  std::string save(const PlaySession& s) {
    std::uint64_t n = ++saves_;
    auto path = dir_ / (s.id() + "-" + std::to_string(n) + ".gtrace");
    write_trace_file(s.trace(), path.string());
    return path.string();
  }

  /// Writes every open session that has at least one step; returns the paths.
  std::vector<std::string> flush() {
    std::vector<std::shared_ptr<PlaySession>> open;
    {
      std::lock_guard lock(mutex_);
      for (auto& [id, s] : sessions_) open.push_back(s);
    }
    std::vector<std::string> out;
    for (const auto& s : open) {
      if (!s->trace().steps.empty()) out.push_back(save(*s));
    }
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  rpg::GameMap map_;
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<PlaySession>> sessions_;
  std::uint64_t next_id_ = 0;
  std::atomic<std::uint64_t> saves_{0};
};

}  // namespace gtp::play
