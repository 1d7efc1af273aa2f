#include "educhat/config.hpp"

#include <fstream>

namespace educhat {

namespace {

using nlohmann::json;

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return empty;
  if (!it->is_object()) throw ConfigError(std::string("'") + key + "' must be an object");
  return *it;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("'") + key + "' has the wrong type");
  }
}

void read_path(const json& j, const char* key, std::filesystem::path& out) {
  std::string s;
  read(j, key, s);
  if (!s.empty()) out = s;
}

template <typename T>
void read_positive(const json& j, const char* key, T& out) {
  std::int64_t v = static_cast<std::int64_t>(out);
  read(j, key, v);
  if (v <= 0) throw ConfigError(std::string("'") + key + "' must be positive");
  out = static_cast<T>(v);
}

}  // namespace

ServiceConfig parse_service_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ServiceConfig c;

  const auto& backend = section(j, "backend");
  read(backend, "endpoint", c.backend_endpoint);
  read(backend, "api_key", c.backend_api_key);
  read(backend, "model", c.backend_model);
  read_positive(backend, "deadline_ms", c.chat.deadline_ms);
  read_positive(backend, "max_new_tokens", c.chat.max_new_tokens);
  read(backend, "temperature", c.chat.temperature);

  const auto& provider = section(j, "provider");
  read(provider, "endpoint", c.provider_endpoint);
  read(provider, "api_key", c.provider_api_key);

  const auto& retrieval = section(j, "retrieval");
  read_positive(retrieval, "k", c.chat.retrieval_k);
  read_positive(retrieval, "max_snippet_chars", c.chat.max_snippet_chars);
  read_positive(retrieval, "self_check_concurrency", c.chat.self_check_concurrency);

  std::string locale;
  read(j, "locale", locale);
  if (!locale.empty()) {
    auto l = locale_from_string(locale);
    if (!l) throw ConfigError("unknown locale '" + locale + "'");
    c.chat.default_locale = *l;
  }
  read_path(j, "template_path", c.template_path);
  read_path(j, "store_path", c.store_path);
  read_path(j, "export_path", c.export_path);
  read_path(j, "ui_dir", c.ui_dir);
  read_positive(j, "history_budget_chars", c.chat.history_budget_chars);
  read(j, "skill_guidance", c.chat.skill_guidance);

  const auto& listen = section(j, "listen");
  read(listen, "host", c.host);
  read(listen, "port", c.port);
  if (c.port < 0 || c.port > 65535) throw ConfigError("'port' out of range");
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  auto j = json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return parse_service_config(j);
}

}  // namespace educhat
