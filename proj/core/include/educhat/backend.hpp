#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "educhat/types.hpp"

namespace educhat {

enum class Role { System, SystemContext, User, Assistant };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

struct Message {
  std::string id;
  Role role = Role::User;
  std::string content;
  std::int64_t created_at_ms = 0;

  bool operator==(const Message&) const = default;
};

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);

struct GenerationParams {
  int max_new_tokens = 512;
  double temperature = 0.7;
  std::int64_t deadline_ms = 30'000;
  Locale locale = Locale::En;
};

struct BackendRequest {
  std::string system_prompt;
  std::vector<Message> messages;
  GenerationParams params;
};

/// System prompt plus every message content, newline separated. Handy for matchers.
std::string flatten(const BackendRequest& request);

class BackendError : public std::runtime_error {
 public:
  enum class Kind {
    Connection,      // could not reach the endpoint
    Unavailable,     // endpoint answered with a non-2xx status
    Timeout,         // deadline exceeded
    MalformedReply,  // reply could not be mapped to a non-empty assistant message
  };

  BackendError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }
  bool retriable() const { return kind_ != Kind::MalformedReply; }

 private:
  Kind kind_;
};

std::string_view to_string(BackendError::Kind kind);

using DeltaSink = std::function<void(std::string_view delta)>;

/// Any chat-capable model. Implementations must be safe for concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Returns an assistant message with non-empty content, or throws BackendError.
  virtual Message generate(const BackendRequest& request) = 0;

  /// Delivers the reply as ordered deltas whose concatenation equals the returned content.
  /// The default emits the whole reply as a single delta.
  virtual Message generate_stream(const BackendRequest& request, const DeltaSink& on_delta);
};

/// Milliseconds since the Unix epoch.
std::int64_t now_ms();

}  // namespace educhat
