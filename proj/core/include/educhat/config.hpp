#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "educhat/chat_service.hpp"

namespace educhat {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Service configuration file (JSON). Every key is optional.
///
/// {
///   "backend":   {"endpoint": "http://host/generate" | "mock", "api_key": "", "model": "", "deadline_ms": 30000},
///   "provider":  {"endpoint": "http://host/search", "api_key": ""},
///   "retrieval": {"k": 5, "max_snippet_chars": 2000, "self_check_concurrency": 4},
///   "locale": "en",
///   "template_path": "",
///   "store_path": "educhat-conversations.jsonl",
///   "export_path": "",
///   "history_budget_chars": 12000,
///   "listen": {"host": "127.0.0.1", "port": 8080},
///   "ui_dir": ""
/// }
struct ServiceConfig {
  std::string backend_endpoint = "mock";
  std::string backend_api_key;
  std::string backend_model;
  std::string provider_endpoint;
  std::string provider_api_key;
  std::filesystem::path template_path;
  std::filesystem::path store_path = "educhat-conversations.jsonl";
  std::filesystem::path export_path;
  std::filesystem::path ui_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  ChatServiceConfig chat;
};

ServiceConfig parse_service_config(const nlohmann::json& j);
ServiceConfig load_service_config(const std::filesystem::path& path);

}  // namespace educhat
