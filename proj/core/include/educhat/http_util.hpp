#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace educhat {

/// "http://host:port/base/path" split into the part cpp-httplib wants for the client and the path.
struct HttpEndpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

/// Throws std::invalid_argument for anything that is not an http(s) URL.
HttpEndpoint parse_endpoint(std::string_view url);

/// Joins a base path and a suffix with exactly one '/'.
std::string join_path(std::string_view base, std::string_view suffix);

struct SseEvent {
  std::string event = "message";
  std::string data;

  bool operator==(const SseEvent&) const = default;
};

/// Renders one server-sent event. Multi-line data is split into several `data:` fields.
std::string format_sse(std::string_view event, std::string_view data);

/// Incremental server-sent-event decoder. Feed arbitrary byte chunks; complete events are
/// handed to the callback in arrival order.
class SseParser {
 public:
  explicit SseParser(std::function<void(const SseEvent&)> on_event) : on_event_(std::move(on_event)) {}

  void feed(std::string_view chunk);
  /// Flushes an event that was not terminated by a blank line.
  void finish();

 private:
  void process_line(std::string_view line);
  void dispatch();

  std::function<void(const SseEvent&)> on_event_;
  std::string buffer_;
  SseEvent current_;
  bool has_data_ = false;
};

}  // namespace educhat
