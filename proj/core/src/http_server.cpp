#include "educhat/http_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "educhat/http_util.hpp"

namespace educhat {

namespace {

using nlohmann::json;

int status_for(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::NotFound: return 404;
    case ServiceError::Kind::InvalidArgument: return 400;
    case ServiceError::Kind::IllegalOverride: return 400;
    case ServiceError::Kind::BackendUnavailable: return 503;
    case ServiceError::Kind::BackendTimeout: return 504;
  }
  return 500;
}

json error_body(std::string_view code, std::string_view message, bool retriable) {
  return {{"error", {{"code", code}, {"message", message}, {"retriable", retriable}}}};
}

json error_body(const ServiceError& e) { return error_body(to_string(e.kind()), e.what(), e.retriable()); }

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

json post_result_json(const PostResult& r) { return {{"message", r.message}, {"annotations", r.annotations}}; }

json conversation_json(const ChatService& service, const Conversation& c) {
  json j = c;
  j["system_prompt"] = service.system_prompt(c);
  return j;
}

json scenes_json() {
  json scenes = json::array();
  for (auto scene : kAllScenes) {
    auto spec = scene_defaults(scene);
    json tools = json::array();
    for (const auto& t : spec.tools.entries()) {
      tools.push_back({{"name", t.name}, {"enabled", t.enabled}, {"overridable", tool_overridable(scene, t.name)}});
    }
    scenes.push_back({{"scene", to_string(scene)}, {"skill", to_string(spec.skill)}, {"tools", tools}});
  }
  return {{"scenes", scenes}};
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

ChatHttpServer::ChatHttpServer(ChatService& service, HttpServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  const auto workers = options_.worker_threads == 0 ? std::size_t{8} : options_.worker_threads;
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  install_routes();
}

ChatHttpServer::~ChatHttpServer() { stop(); }

void ChatHttpServer::install_routes() {
  auto& srv = *server_;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    spdlog::error("unhandled error in request: {}", what);
    reply_json(res, 500, error_body("internal", what, false));
  });

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"status", "ok"}});
  });

  srv.Get("/scenes", [](const httplib::Request&, httplib::Response& res) { reply_json(res, 200, scenes_json()); });

  srv.Post("/conversations", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body.empty() ? std::string("{}") : req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return reply_json(res, 400, error_body("invalid_argument", "request body must be a JSON object", false));
    }
    if (!body.contains("scene") || !body["scene"].is_string()) {
      return reply_json(res, 400, error_body("invalid_argument", "field 'scene' is required", false));
    }
    auto scene = scene_from_string(body["scene"].get<std::string>());
    if (!scene) {
      return reply_json(res, 400,
                        error_body("invalid_argument", "unknown scene '" + body["scene"].get<std::string>() + "'", false));
    }
    ToolOverrides overrides;
    if (auto it = body.find("overrides"); it != body.end() && !it->is_null()) {
      if (!it->is_object()) return reply_json(res, 400, error_body("invalid_argument", "'overrides' must be an object", false));
      for (const auto& [name, value] : it->items()) {
        if (!value.is_boolean()) {
          return reply_json(res, 400, error_body("invalid_argument", "override '" + name + "' must be a boolean", false));
        }
        overrides[name] = value.get<bool>();
      }
    }
    std::optional<Locale> locale;
    if (auto it = body.find("locale"); it != body.end() && !it->is_null()) {
      locale = it->is_string() ? locale_from_string(it->get<std::string>()) : std::nullopt;
      if (!locale) return reply_json(res, 400, error_body("invalid_argument", "locale must be \"en\" or \"zh\"", false));
    }
    try {
      auto c = service_.create_conversation(*scene, overrides, locale);
      reply_json(res, 201, conversation_json(service_, c));
    } catch (const ServiceError& e) {
      reply_json(res, status_for(e.kind()), error_body(e));
    }
  });

  srv.Get("/conversations", [this](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"conversations", service_.list_conversations()}});
  });

  srv.Get(R"(/conversations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      reply_json(res, 200, conversation_json(service_, service_.get_conversation(req.matches[1].str())));
    } catch (const ServiceError& e) {
      reply_json(res, status_for(e.kind()), error_body(e));
    }
  });

  srv.Delete(R"(/conversations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    service_.delete_conversation(req.matches[1].str());
    res.status = 204;
  });

  srv.Post(R"(/conversations/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1].str();
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      return reply_json(res, 400, error_body("invalid_argument", "body must be {\"text\": string, \"stream\": bool}", false));
    }
    const std::string text = body["text"].get<std::string>();
    const bool stream = body.value("stream", false);
    if (!stream) {
      try {
        reply_json(res, 200, post_result_json(service_.post_message(id, text)));
      } catch (const ServiceError& e) {
        reply_json(res, status_for(e.kind()), error_body(e));
      }
      return;
    }

    // Report request-level errors with a proper status before committing to a stream.
    try {
      (void)service_.get_conversation(id);
    } catch (const ServiceError& e) {
      return reply_json(res, status_for(e.kind()), error_body(e));
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      return reply_json(res, 400, error_body("invalid_argument", "message text is empty", false));
    }

    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, id, text](std::size_t, httplib::DataSink& sink) {
      DeltaSink on_delta = [&sink](std::string_view delta) {
        auto event = format_sse("delta", dump(json{{"content", delta}}));
        sink.write(event.data(), event.size());
      };
      std::string tail;
      try {
        auto result = service_.post_message(id, text, &on_delta);
        tail = format_sse("annotations", dump(json(result.annotations)));
        tail += format_sse("done", dump(json{{"message", result.message}}));
      } catch (const ServiceError& e) {
        tail = format_sse("error", dump(error_body(e)));
      } catch (const std::exception& e) {
        tail = format_sse("error", dump(error_body("internal", e.what(), false)));
      }
      sink.write(tail.data(), tail.size());
      sink.done();
      return true;
    });
  });

  if (!options_.ui_dir.empty()) {
    if (!srv.set_mount_point("/", options_.ui_dir.string())) {
      spdlog::warn("web client directory {} not found; UI disabled", options_.ui_dir.string());
    }
  }
}

int ChatHttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void ChatHttpServer::listen() { server_->listen_after_bind(); }

void ChatHttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ChatHttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace educhat
