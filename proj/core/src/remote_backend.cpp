#include "educhat/remote_backend.hpp"

#include <atomic>
#include <chrono>

#include <httplib.h>

#include "educhat/http_util.hpp"

namespace educhat {

namespace {

using Clock = std::chrono::steady_clock;

std::atomic<std::uint64_t> g_next_id{1};

Message assistant_message(std::string content) {
  if (content.empty()) throw BackendError(BackendError::Kind::MalformedReply, "backend returned empty content");
  return Message{"remote-" + std::to_string(g_next_id++), Role::Assistant, std::move(content), now_ms()};
}

void set_timeouts(httplib::Client& cli, std::chrono::milliseconds remaining) {
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(remaining);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(remaining - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {
  (void)parse_endpoint(config_.endpoint);
}

nlohmann::json RemoteBackend::request_body(const BackendRequest& request, const std::string& model, bool stream) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return {
      {"model", model},
      {"system_prompt", request.system_prompt},
      {"messages", messages},
      {"params",
       {{"max_new_tokens", request.params.max_new_tokens},
        {"temperature", request.params.temperature},
        {"locale", to_string(request.params.locale)}}},
      {"stream", stream},
  };
}

Message RemoteBackend::generate(const BackendRequest& request) { return call(request, nullptr); }

Message RemoteBackend::generate_stream(const BackendRequest& request, const DeltaSink& on_delta) {
  return call(request, &on_delta);
}

Message RemoteBackend::call(const BackendRequest& request, const DeltaSink* on_delta) {
  if (request.messages.empty()) throw std::invalid_argument("remote backend needs at least one message");
  const auto endpoint = parse_endpoint(config_.endpoint);
  const auto deadline = Clock::now() + std::chrono::milliseconds(request.params.deadline_ms);
  const bool stream = on_delta != nullptr;
  const auto body = request_body(request, config_.model, stream).dump();

  for (int attempt = 0; attempt < 2; ++attempt) {
    // Round up so a socket timeout only fires once the deadline has passed.
    auto remaining = std::chrono::ceil<std::chrono::milliseconds>(deadline - Clock::now()) + std::chrono::milliseconds(1);
    if (Clock::now() >= deadline) throw BackendError(BackendError::Kind::Timeout, "backend deadline exceeded");

    httplib::Client cli(endpoint.origin);
    set_timeouts(cli, remaining);

    httplib::Request req;
    req.method = "POST";
    req.path = endpoint.path;
    req.body = body;
    req.set_header("Content-Type", "application/json");
    if (stream) req.set_header("Accept", "text/event-stream");
    if (!config_.api_key.empty()) req.set_header("Authorization", "Bearer " + config_.api_key);

    int status = 0;
    bool deadline_hit = false;
    bool done = false;
    std::string raw;
    std::string content;
    std::string stream_error;
    SseParser parser([&](const SseEvent& ev) {
      if (done || !stream_error.empty()) return;
      if (ev.data == "[DONE]") {
        done = true;
        return;
      }
      auto j = nlohmann::json::parse(ev.data, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("delta") || !j["delta"].is_string()) {
        stream_error = "malformed stream event: " + ev.data;
        return;
      }
      auto delta = j["delta"].get<std::string>();
      content += delta;
      if (!delta.empty()) (*on_delta)(delta);
    });

    req.response_handler = [&](const httplib::Response& res) {
      status = res.status;
      return true;
    };
    req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
      if (Clock::now() > deadline) {
        deadline_hit = true;
        return false;
      }
      if (stream && status >= 200 && status < 300) {
        parser.feed(std::string_view(data, len));
      } else {
        raw.append(data, len);
      }
      return true;
    };

    auto res = cli.send(req);
    if (!res) {
      auto err = res.error();
      if (deadline_hit || Clock::now() >= deadline || err == httplib::Error::ConnectionTimeout) {
        throw BackendError(BackendError::Kind::Timeout, "backend deadline exceeded");
      }
      if (err == httplib::Error::Connection && attempt == 0) continue;
      throw BackendError(BackendError::Kind::Connection, "backend request failed: " + httplib::to_string(err));
    }
    if (status < 200 || status >= 300) {
      throw BackendError(BackendError::Kind::Unavailable,
                         "backend returned HTTP " + std::to_string(status) + (raw.empty() ? "" : ": " + raw));
    }
    if (stream) {
      parser.finish();
      if (!stream_error.empty()) throw BackendError(BackendError::Kind::MalformedReply, stream_error);
      if (!done) throw BackendError(BackendError::Kind::MalformedReply, "event stream ended without [DONE]");
      return assistant_message(std::move(content));
    }
    auto j = nlohmann::json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("content") || !j["content"].is_string()) {
      throw BackendError(BackendError::Kind::MalformedReply, "backend reply lacks a string 'content' field");
    }
    return assistant_message(j["content"].get<std::string>());
  }
  throw BackendError(BackendError::Kind::Connection, "backend unreachable after retry");
}

}  // namespace educhat
