#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "educhat/chat_service.hpp"

namespace httplib {
class Server;
}

namespace educhat {

struct HttpServerOptions {
  std::size_t worker_threads = 32;
  /// Static web client to serve at "/", if set.
  std::filesystem::path ui_dir;
};

/// JSON/SSE front end of ChatService.
///
///   POST   /conversations                {scene, overrides?, locale?}
///   GET    /conversations
///   GET    /conversations/{id}
///   DELETE /conversations/{id}
///   POST   /conversations/{id}/messages  {text, stream?}
///   GET    /scenes                        capability listing
///   GET    /health
///
/// Streaming replies use server-sent events: `delta` events ({"content": str}), one
/// `annotations` event, then `done` ({"message": {...}}). Failures after the stream has started
/// arrive as an `error` event.
class ChatHttpServer {
 public:
  explicit ChatHttpServer(ChatService& service, HttpServerOptions options = {});
  ~ChatHttpServer();

  ChatHttpServer(const ChatHttpServer&) = delete;
  ChatHttpServer& operator=(const ChatHttpServer&) = delete;

  /// Binds without serving. Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen();
  /// Serves on a background thread.
  void start();
  void stop();

  int port() const { return port_; }

 private:
  void install_routes();

  ChatService& service_;
  HttpServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace educhat
