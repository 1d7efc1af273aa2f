#include "educhat/backend.hpp"

#include <array>
#include <chrono>

namespace educhat {

namespace {

constexpr std::array<std::pair<Role, std::string_view>, 4> kRoleNames = {{
    {Role::System, "system"},
    {Role::SystemContext, "system-context"},
    {Role::User, "user"},
    {Role::Assistant, "assistant"},
}};

}  // namespace

std::string_view to_string(Role role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "user";
}

std::optional<Role> role_from_string(std::string_view s) {
  for (const auto& [r, name] : kRoleNames) {
    if (name == s) return r;
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const Message& m) {
  j = nlohmann::json{{"id", m.id}, {"role", to_string(m.role)}, {"content", m.content}, {"created_at", m.created_at_ms}};
}

void from_json(const nlohmann::json& j, Message& m) {
  m.id = j.at("id").get<std::string>();
  auto role = role_from_string(j.at("role").get<std::string>());
  if (!role) throw std::invalid_argument("unknown message role '" + j.at("role").get<std::string>() + "'");
  m.role = *role;
  m.content = j.at("content").get<std::string>();
  m.created_at_ms = j.value("created_at", std::int64_t{0});
}

std::string flatten(const BackendRequest& request) {
  std::string out = request.system_prompt;
  for (const auto& m : request.messages) {
    out += '\n';
    out += m.content;
  }
  return out;
}

std::string_view to_string(BackendError::Kind kind) {
  switch (kind) {
    case BackendError::Kind::Connection: return "connection";
    case BackendError::Kind::Unavailable: return "unavailable";
    case BackendError::Kind::Timeout: return "timeout";
    case BackendError::Kind::MalformedReply: return "malformed_reply";
  }
  return "unknown";
}

Message ChatBackend::generate_stream(const BackendRequest& request, const DeltaSink& on_delta) {
  auto reply = generate(request);
  if (on_delta) on_delta(reply.content);
  return reply;
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace educhat
