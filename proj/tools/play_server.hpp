#pragma once

// HTTP + WebSocket front end for gtp::play::SessionService. One thread per
// connection; every WebSocket connection is its own session.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "gtp/play_session.hpp"

namespace gtp::play {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

// Served when no UI bundle directory is given: a bare-bones client that
// draws the grid as text and sends arrow keys.
inline constexpr std::string_view kFallbackIndex = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>gtp play</title>
<style>body{font-family:monospace;background:#111;color:#ddd}pre{font-size:20px;line-height:20px}</style></head>
<body><pre id="board">connecting...</pre><pre id="hud"></pre>
<button id="save">save trace</button> <button id="reset">reset</button> <span id="msg"></span>
<script>
const ws = new WebSocket((location.protocol === "https:" ? "wss://" : "ws://") + location.host + "/ws");
const send = (o) => ws.send(JSON.stringify(Object.assign({protocol: "gplay-1"}, o)));
const keys = {ArrowUp: "up", ArrowDown: "down", ArrowLeft: "left", ArrowRight: "right"};
document.addEventListener("keydown", (e) => { if (keys[e.key]) { e.preventDefault(); send({command: "move", direction: keys[e.key]}); } });
document.getElementById("save").onclick = () => send({command: "save-trace"});
document.getElementById("reset").onclick = () => send({command: "reset"});
ws.onmessage = (m) => {
  const s = JSON.parse(m.data);
  if (s.type === "error") { document.getElementById("msg").textContent = s.message; return; }
  const rows = s.map.grid.map((r) => r.split(""));
  for (const it of s.state.items) if (it.status === "on-tile") rows[it.tile[0]][it.tile[1]] = it.type[0];
  for (const n of s.map.npcs) rows[n.tile[0]][n.tile[1]] = "N";
  rows[s.state.hero[0]][s.state.hero[1]] = "@";
  document.getElementById("board").textContent = rows.map((r) => r.join("")).join("\n");
  document.getElementById("hud").textContent = s.hud.map((q) => `${q.quest}: ${q.status} ${q.have}/${q.need} ${q.item_type}`).join("\n") + `\nsteps: ${s.steps}`;
  document.getElementById("msg").textContent = s.type === "saved" ? "saved " + s.path : (s.events || []).join(" ");
};
</script></body></html>
)html";

inline std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

class PlayServer {
 public:
  PlayServer(SessionService& service, std::optional<std::filesystem::path> ui_dir)
      : service_(service), ui_dir_(std::move(ui_dir)) {}

  /// Binds the port; throws boost::system::system_error if it is taken.
  void bind(unsigned short port) {
    tcp::endpoint ep(net::ip::make_address("127.0.0.1"), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Serves until SIGINT/SIGTERM.
  void run() {
    net::signal_set signals(ioc_, SIGINT, SIGTERM);
    signals.async_wait([this](const beast::error_code&, int sig) {
      spdlog::info("signal {} received, shutting down", sig);
      ioc_.stop();
    });
    accept();
    ioc_.run();
  }

 private:
  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (!ec) {
        std::thread([this, s = std::move(socket)]() mutable { serve(std::move(s)); }).detach();
      }
      accept();
    });
  }

  void serve(tcp::socket socket) {
    try {
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::read(socket, buffer, req);
      if (websocket::is_upgrade(req)) {
        websocket_session(std::move(socket), std::move(req));
        return;
      }
      http::write(socket, respond(req));
      socket.shutdown(tcp::socket::shutdown_send);
    } catch (const std::exception& e) {
      spdlog::debug("connection closed: {}", e.what());
    }
  }

  void websocket_session(tcp::socket socket, http::request<http::string_body> req) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept(req);
    ws.text(true);
    auto session = service_.open();
    spdlog::info("session {} opened", session->id());
    try {
      ws.write(net::buffer(session->snapshot().dump()));
      for (;;) {
        beast::flat_buffer buffer;
        ws.read(buffer);
        std::string reply = service_.handle(*session, beast::buffers_to_string(buffer.data()));
        ws.write(net::buffer(reply));
      }
    } catch (const std::exception& e) {
      spdlog::info("session {} closed: {}", session->id(), e.what());
    }
    if (!session->trace().steps.empty()) spdlog::info("session {} trace written to {}", session->id(), service_.save(*session));
    service_.close(session->id());
  }

  http::response<http::string_body> respond(const http::request<http::string_body>& req) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    std::string target(req.target());
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target == "/") target = "/index.html";
    if (target.find("..") != std::string::npos) {
      res.result(http::status::bad_request);
      res.body() = "bad path";
    } else if (ui_dir_ && std::filesystem::is_regular_file(*ui_dir_ / target.substr(1))) {
      auto path = *ui_dir_ / target.substr(1);
      std::ifstream in(path, std::ios::binary);
      std::ostringstream body;
      body << in.rdbuf();
      res.result(http::status::ok);
      res.set(http::field::content_type, mime_type(path));
      res.body() = body.str();
    } else if (target == "/index.html") {
      res.result(http::status::ok);
      res.set(http::field::content_type, "text/html");
      res.body() = std::string(kFallbackIndex);
    } else {
      res.result(http::status::not_found);
      res.body() = "not found";
    }
    res.prepare_payload();
    return res;
  }

  SessionService& service_;
  std::optional<std::filesystem::path> ui_dir_;
  net::io_context ioc_;
  tcp::acceptor acceptor_{ioc_};
};

}  // namespace gtp::play
